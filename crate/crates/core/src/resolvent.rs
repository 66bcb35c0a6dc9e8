//! Differential resolvent of the scalar delayed equation
//! `d/dt G(t, s) = -lambda c(t) G(t - tau1, s)` with `G(s, s) = 1` and
//! `G(u, s) = 0` for `u < s`, together with its decay rate and an empirical
//! envelope constant.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gains::GainFunction;
use crate::numeric::{aligned_steps, bisect_increasing};

const ROOT_CAP: f64 = 1e6;
const ROOT_TOL: f64 = 1e-12;

/// Default resolvent grid: the largest step not exceeding this that divides `tau1`.
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct ResolventProblem {
    pub lambda: Complex64,
    pub gain: GainFunction,
    pub tau1: f64,
    pub t0: f64,
}

impl ResolventProblem {
    pub fn new(lambda: Complex64, gain: GainFunction, tau1: f64, t0: f64) -> Result<Self> {
        if !(lambda.re > 0.0 && lambda.im.is_finite() && lambda.re.is_finite()) {
            return Err(Error::Config(format!("lambda = {lambda} must have positive real part")));
        }
        if !(tau1 >= 0.0 && tau1.is_finite()) {
            return Err(Error::Config(format!("tau1 = {tau1} must be finite and nonnegative")));
        }
        if !t0.is_finite() || t0 < 0.0 {
            return Err(Error::Config(format!("t0 = {t0} must be finite and nonnegative")));
        }
        Ok(Self { lambda, gain, tau1, t0 })
    }

    /// `c_bar = sup_{t >= t0} c(t)`.
    pub fn c_bar(&self) -> Result<f64> {
        self.gain.tail_sup(self.t0)
    }

    /// `tau1 * c_bar * |lambda|^2 / Re(lambda)`; feasible when below 1.
    pub fn margin(&self) -> Result<f64> {
        Ok(self.tau1 * self.c_bar()? * self.lambda.norm_sqr() / self.lambda.re)
    }

    pub fn is_feasible(&self) -> Result<bool> {
        Ok(self.margin()? < 1.0)
    }

    /// Grid step used when the caller does not pick one.
    pub fn default_dt(&self) -> f64 {
        if self.tau1 == 0.0 {
            DEFAULT_DT
        } else {
            self.tau1 / (self.tau1 / DEFAULT_DT).ceil()
        }
    }
}

/// `G(., s)` sampled on `s, s + dt, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventSolution {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Integrates the resolvent on `[s, t_end]` with classical RK4.
///
/// Delayed arguments fall on grid points or midpoints; midpoints use cubic
/// Hermite interpolation of the stored solution and derivative. Breaking
/// points `s + j tau1` are grid points, so each step sees a smooth right-hand
/// side.
pub fn solve_resolvent(p: &ResolventProblem, s: f64, t_end: f64, dt: f64) -> Result<ResolventSolution> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt = {dt} must be positive")));
    }
    if !(t_end > s) {
        return Err(Error::Config(format!("t_end = {t_end} must exceed s = {s}")));
    }
    let lag = aligned_steps(p.tau1, dt)
        .ok_or_else(|| Error::Config(format!("tau1 = {} is not a multiple of dt = {dt}", p.tau1)))?;
    let steps = ((t_end - s) / dt - 1e-9).ceil() as usize;
    let minus_lambda = -p.lambda;
    let rate = |t: f64| -> Result<Complex64> { Ok(minus_lambda * p.gain.eval(t)?) };

    let mut times = Vec::with_capacity(steps + 1);
    let mut y: Vec<Complex64> = Vec::with_capacity(steps + 1);
    // right derivative at each grid point
    let mut dy: Vec<Complex64> = Vec::with_capacity(steps + 1);
    let zero = Complex64::new(0.0, 0.0);
    times.push(s);
    y.push(Complex64::new(1.0, 0.0));

    let delayed = |y: &[Complex64], k: usize| if k >= lag { y[k - lag] } else { zero };

    if lag == 0 {
        dy.push(rate(s)? * y[0]);
        for m in 0..steps {
            let t = s + m as f64 * dt;
            let h = dt;
            let ym = y[m];
            let a_mid = rate(t + 0.5 * h)?;
            let k1 = dy[m];
            let k2 = a_mid * (ym + 0.5 * h * k1);
            let k3 = a_mid * (ym + 0.5 * h * k2);
            let a_end = rate(t + h)?;
            let k4 = a_end * (ym + h * k3);
            let next = ym + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            times.push(s + (m + 1) as f64 * dt);
            y.push(next);
            dy.push(a_end * next);
        }
    } else {
        dy.push(rate(s)? * delayed(&y, 0));
        for m in 0..steps {
            let t = s + m as f64 * dt;
            let h = dt;
            // Delayed interval [t - tau1, t + h - tau1] = grid interval starting at m - lag.
            let (g0, g_mid, g1) = if m >= lag {
                let j = m - lag;
                let (y0, y1) = (y[j], y[j + 1]);
                // G' jumps at s + tau1; the interval ending there needs the left derivative 0
                let d1 = if j + 1 == lag { zero } else { dy[j + 1] };
                let d0 = dy[j];
                let mid = 0.5 * (y0 + y1) + h * (d0 - d1) / 8.0;
                (y0, mid, y1)
            } else {
                // the whole delayed interval lies before s (left limit 0 at its end)
                (zero, zero, zero)
            };
            let k1 = rate(t)? * g0;
            let a_mid = rate(t + 0.5 * h)?;
            let k2 = a_mid * g_mid;
            let k3 = k2;
            let k4 = rate(t + h)? * g1;
            let next = y[m] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            times.push(s + (m + 1) as f64 * dt);
            y.push(next);
            let k = m + 1;
            dy.push(rate(s + k as f64 * dt)? * delayed(&y, k));
        }
    }
    Ok(ResolventSolution { times, values: y })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayRate {
    pub rho1: f64,
    /// `+inf` when `tau1 = 0`.
    pub rho2: f64,
    pub rho: f64,
    /// Envelope constant fitted on the default horizon.
    pub fitted_b: f64,
}

/// Left side of the equation defining `rho1`; increasing in `rho`.
pub fn rho1_equation(rho: f64, lambda: Complex64, tau1: f64, c_bar: f64) -> f64 {
    let m2 = lambda.norm_sqr();
    3.0 * rho * m2 * tau1 * tau1 * c_bar * c_bar * (rho * c_bar * tau1).exp() + 2.0 * rho
        - 2.0 * (lambda.re - m2 * tau1 * c_bar)
}

/// `rho1`, `rho2` and `rho = min(rho1, rho2)` without fitting `b`.
///
/// With `tau1 = 0` the exact undelayed rate `rho = 2 Re(lambda)` is returned
/// (`rho1 = Re(lambda)`, `rho2 = inf`).
pub fn decay_exponents(p: &ResolventProblem) -> Result<(f64, f64, f64)> {
    let margin = p.margin()?;
    if !(margin < 1.0) {
        return Err(Error::Infeasible(format!(
            "tau1 * c_bar * |lambda|^2 / Re(lambda) = {margin} is not below 1"
        )));
    }
    if p.tau1 == 0.0 {
        return Ok((p.lambda.re, f64::INFINITY, 2.0 * p.lambda.re));
    }
    let c_bar = p.c_bar()?;
    if c_bar == 0.0 {
        return Err(Error::Infeasible("gain vanishes on the tail; no decay".into()));
    }
    let rho1 = bisect_increasing(
        |r| rho1_equation(r, p.lambda, p.tau1, c_bar),
        0.0,
        1.0,
        ROOT_CAP,
        ROOT_TOL,
    )?;
    let x = p.lambda.norm() * c_bar * p.tau1;
    let rho2 = (1.0 / (c_bar * p.tau1)) * (1.0 / x).ln();
    Ok((rho1, rho2, rho1.min(rho2)))
}

/// Horizon (past `t0`) over which [`decay_rate`] fits `b`.
pub const DEFAULT_ENVELOPE_HORIZON: f64 = 50.0;

pub fn decay_rate(p: &ResolventProblem) -> Result<DecayRate> {
    let (rho1, rho2, rho) = decay_exponents(p)?;
    let mut rate = DecayRate {
        rho1,
        rho2,
        rho,
        fitted_b: f64::NAN,
    };
    let env = verify_envelope(p, &rate, p.t0 + DEFAULT_ENVELOPE_HORIZON)?;
    rate.fitted_b = env.b_fit;
    Ok(rate)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub b_fit: f64,
    pub holds: bool,
}

/// Number of windows compared after burn-in.
const ENVELOPE_WINDOWS: usize = 8;
const ENVELOPE_BURN_IN: f64 = 0.2;
const ENVELOPE_SLACK: f64 = 1e-6;

/// `g(t) = |G(t, t0)|^2 exp(rho int_{t0}^t c)`, computed in log space.
fn scaled_profile(p: &ResolventProblem, sol: &ResolventSolution, rho: f64) -> Result<Vec<f64>> {
    let mut cum = 0.0;
    let mut out = Vec::with_capacity(sol.times.len());
    for (k, (t, g)) in sol.times.iter().zip(&sol.values).enumerate() {
        if k > 0 {
            cum += p.gain.integral(sol.times[k - 1], *t)?;
        }
        let a = g.norm_sqr();
        out.push(if a == 0.0 { 0.0 } else { (a.ln() + rho * cum).exp() });
    }
    Ok(out)
}

/// Checks `|G(t, t0)|^2 <= b exp(-rho int_{t0}^t c)` on `[t0, horizon]`.
///
/// `b_fit` is the grid maximum of `|G|^2 exp(rho int c)`. The bound is
/// accepted when `b_fit` is finite and, after discarding the first 20% of
/// the grid, the maxima over eight consecutive windows never increase (up to
/// a relative slack of `1e-6`).
pub fn verify_envelope(p: &ResolventProblem, rate: &DecayRate, horizon: f64) -> Result<Envelope> {
    let sol = solve_resolvent(p, p.t0, horizon, p.default_dt())?;
    let g = scaled_profile(p, &sol, rate.rho)?;
    let b_fit = g.iter().copied().fold(0.0, f64::max);
    let start = (ENVELOPE_BURN_IN * g.len() as f64) as usize;
    let tail = &g[start..];
    let width = tail.len() / ENVELOPE_WINDOWS;
    let mut holds = b_fit.is_finite() && width > 0;
    if holds {
        let maxima: Vec<f64> = tail
            .chunks(width)
            .take(ENVELOPE_WINDOWS)
            .map(|w| w.iter().copied().fold(0.0, f64::max))
            .collect();
        holds = maxima
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + ENVELOPE_SLACK) + f64::MIN_POSITIVE);
    }
    Ok(Envelope { b_fit, holds })
}

/// CSV with `t,re_gamma,im_gamma,envelope`, where `envelope` is the fitted
/// bound `b exp(-rho int c)` on `|G|^2`.
pub fn write_csv<W: Write>(
    mut w: W,
    p: &ResolventProblem,
    sol: &ResolventSolution,
    rate: &DecayRate,
    stride: usize,
) -> Result<()> {
    let io = |e| Error::io("<resolvent csv>", e);
    writeln!(w, "t,re_gamma,im_gamma,envelope").map_err(io)?;
    let mut cum = 0.0;
    let last = sol.times.len() - 1;
    for (k, (t, g)) in sol.times.iter().zip(&sol.values).enumerate() {
        if k > 0 {
            cum += p.gain.integral(sol.times[k - 1], *t)?;
        }
        if k % stride.max(1) == 0 || k == last {
            let env = rate.fitted_b * (-rate.rho * cum).exp();
            writeln!(w, "{t},{},{},{env}", g.re, g.im).map_err(io)?;
        }
    }
    Ok(())
}
