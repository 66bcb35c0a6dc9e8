//! Consensus diagnostics: disagreement, mean-square curves, rate fits,
//! centroid statistics and the degenerate Lyapunov functional.
//!
//! Per-trial series are reduced across trials with pairwise summation in
//! trial order, so ensemble statistics do not depend on how trials were
//! scheduled.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gains::GainFunction;
use crate::graph::{ModalBasis, SpectralData};
use crate::noise::NoiseModel;
use crate::numeric::{ls_slope, pairwise_sum, quantile_sorted};
use crate::sdde::Trajectory;

/// Fraction of the horizon discarded before fitting rates.
pub const DEFAULT_BURN_IN: f64 = 0.2;

/// Norms below this are clamped before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

/// `delta_i = x_i - sum_k pi_k x_k`, agent-major with `n_dim` components per agent.
pub fn disagreement(x: &[f64], pi: &[f64], n_dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0; n_dim];
    for (i, p) in pi.iter().enumerate() {
        for d in 0..n_dim {
            mean[d] += p * x[i * n_dim + d];
        }
    }
    x.iter().enumerate().map(|(k, v)| v - mean[k % n_dim]).collect()
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `||x_i - x_j||^2` for every unordered pair `i < j`, in lexicographic order.
pub fn pairwise_sq_distances(x: &[f64], n_agents: usize, n_dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_agents * (n_agents - 1) / 2);
    for i in 0..n_agents {
        for j in i + 1..n_agents {
            let d: f64 = (0..n_dim)
                .map(|d| {
                    let e = x[i * n_dim + d] - x[j * n_dim + d];
                    e * e
                })
                .sum();
            out.push(d);
        }
    }
    out
}

/// Least-squares slope of `log(max(norm, 1e-300))` against `t` over `t >= burn_in`.
///
/// `DegenerateWindow` when fewer than two points in the window lie above the
/// floor.
pub fn log_slope(times: &[f64], norms: &[f64], burn_in: f64) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut live = 0;
    for (t, v) in times.iter().zip(norms) {
        if *t + 1e-12 < burn_in {
            continue;
        }
        if *v > LOG_FLOOR {
            live += 1;
        }
        xs.push(*t);
        ys.push(v.max(LOG_FLOOR).ln());
    }
    if live < 2 {
        return Err(Error::DegenerateWindow);
    }
    ls_slope(&xs, &ys).ok_or(Error::DegenerateWindow)
}

/// Almost-sure rate estimate: slope of `log ||delta(t)||` on `[burn_in, T]`.
pub fn as_rate_estimate(traj: &Trajectory, pi: &[f64], burn_in: f64) -> Result<f64> {
    let norms: Vec<f64> = traj
        .states
        .iter()
        .map(|x| sq_norm(&disagreement(x, pi, traj.n_dim)).sqrt())
        .collect();
    log_slope(&traj.times, &norms, burn_in)
}

/// Per-trial series sampled at the recorded times.
#[derive(Clone, Debug)]
pub struct TrialSeries {
    n_agents: usize,
    n_dim: usize,
    len: usize,
    /// `||delta(t)||^2`.
    pub sq_disagreement: Vec<f64>,
    /// Record-major `||x_i - x_j||^2` for `i < j`.
    pub pair_sq: Vec<f64>,
    /// Record-major `pi^T x(t)` per component.
    pub centroid: Vec<f64>,
    pub as_rate: f64,
    pub diverged_at: Option<f64>,
}

impl TrialSeries {
    pub fn new(n_agents: usize, n_dim: usize, records: usize) -> Self {
        let pairs = n_agents * (n_agents - 1) / 2;
        Self {
            n_agents,
            n_dim,
            len: records,
            sq_disagreement: Vec::with_capacity(records),
            pair_sq: Vec::with_capacity(records * pairs),
            centroid: Vec::with_capacity(records * n_dim),
            as_rate: f64::NAN,
            diverged_at: None,
        }
    }

    fn pairs(&self) -> usize {
        self.n_agents * (self.n_agents - 1) / 2
    }

    pub fn observe(&mut self, pi: &[f64], x: &[f64]) {
        let delta = disagreement(x, pi, self.n_dim);
        self.sq_disagreement.push(sq_norm(&delta));
        self.pair_sq.extend(pairwise_sq_distances(x, self.n_agents, self.n_dim));
        for d in 0..self.n_dim {
            let c: f64 = pi.iter().enumerate().map(|(i, p)| p * x[i * self.n_dim + d]).sum();
            self.centroid.push(c);
        }
    }

    /// Pads records lost to divergence and fits the rate.
    ///
    /// After divergence the squared distances are `+inf` and the centroid is
    /// `NaN`; a diverged trial's rate is `+inf`. A trial whose disagreement
    /// underflows gets rate `-inf`.
    pub fn finish(&mut self, times: &[f64], burn_in: f64, diverged_at: Option<f64>) {
        self.diverged_at = diverged_at;
        let seen = self.sq_disagreement.len();
        let pairs = self.pairs();
        for _ in seen..self.len {
            self.sq_disagreement.push(f64::INFINITY);
            self.pair_sq.extend(std::iter::repeat_n(f64::INFINITY, pairs));
            self.centroid.extend(std::iter::repeat_n(f64::NAN, self.n_dim));
        }
        self.as_rate = if diverged_at.is_some() {
            f64::INFINITY
        } else {
            let norms: Vec<f64> = self.sq_disagreement.iter().map(|v| v.sqrt()).collect();
            log_slope(times, &norms, burn_in).unwrap_or(f64::NEG_INFINITY)
        };
    }
}

/// Quantiles of the per-trial almost-sure rate estimates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateSummary {
    pub mean: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub per_trial: Vec<f64>,
}

impl RateSummary {
    fn new(per_trial: Vec<f64>) -> Self {
        let mut sorted = per_trial.clone();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean: pairwise_sum(&per_trial) / per_trial.len() as f64,
            q05: quantile_sorted(&sorted, 0.05),
            median: quantile_sorted(&sorted, 0.5),
            q95: quantile_sorted(&sorted, 0.95),
            per_trial,
        }
    }
}

/// Ensemble statistics per recorded time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// `E ||delta(t)||^2`.
    pub ms_disagreement: Vec<f64>,
    /// `max_{i != j} E ||x_i - x_j||^2`.
    pub max_pairwise_ms: Vec<f64>,
    /// Ensemble mean of `pi^T x(t)`, averaged over state components.
    pub centroid_mean: Vec<f64>,
    /// Ensemble variance of `pi^T x(t)`, summed over state components.
    pub centroid_var: Vec<f64>,
    pub as_rate: RateSummary,
    pub trials: usize,
    pub diverged: usize,
}

/// Reduces per-trial series recorded on `times`.
pub fn aggregate(times: &[f64], series: &[TrialSeries]) -> EnsembleStats {
    let trials = series.len();
    assert!(trials > 0, "aggregate needs at least one trial");
    let n_dim = series[0].n_dim;
    let pairs = series[0].pairs();
    let tn = trials as f64;
    let mut column = vec![0.0; trials];
    let mut mean_of = |f: &dyn Fn(&TrialSeries) -> f64| -> f64 {
        for (slot, s) in column.iter_mut().zip(series) {
            *slot = f(s);
        }
        pairwise_sum(&column) / tn
    };
    let mut ms = Vec::with_capacity(times.len());
    let mut max_pair = Vec::with_capacity(times.len());
    let mut c_mean = Vec::with_capacity(times.len());
    let mut c_var = Vec::with_capacity(times.len());
    for r in 0..times.len() {
        ms.push(mean_of(&|s| s.sq_disagreement[r]));
        let mut best = 0.0f64;
        for p in 0..pairs {
            let m = mean_of(&|s| s.pair_sq[r * pairs + p]);
            best = if m.is_nan() { f64::NAN } else { best.max(m) };
        }
        max_pair.push(best);
        let mut mean_sum = 0.0;
        let mut var_sum = 0.0;
        for d in 0..n_dim {
            let mu = mean_of(&|s| s.centroid[r * n_dim + d]);
            let var = if trials > 1 {
                mean_of(&|s| {
                    let e = s.centroid[r * n_dim + d] - mu;
                    e * e
                }) * tn
                    / (tn - 1.0)
            } else {
                0.0
            };
            mean_sum += mu;
            var_sum += var;
        }
        c_mean.push(mean_sum / n_dim as f64);
        c_var.push(var_sum);
    }
    EnsembleStats {
        times: times.to_vec(),
        ms_disagreement: ms,
        max_pairwise_ms: max_pair,
        centroid_mean: c_mean,
        centroid_var: c_var,
        as_rate: RateSummary::new(series.iter().map(|s| s.as_rate).collect()),
        trials,
        diverged: series.iter().filter(|s| s.diverged_at.is_some()).count(),
    }
}

impl EnsembleStats {
    pub const CSV_HEADER: &'static str = "t,ms_disagreement,max_pairwise_ms,centroid_mean,centroid_var";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.times[r],
                self.ms_disagreement[r],
                self.max_pairwise_ms[r],
                self.centroid_mean[r],
                self.centroid_var[r]
            )?;
        }
        Ok(())
    }

    /// Index of the recorded time closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }

    /// Least-squares slope of `ln E||delta||^2` over `t >= burn_in`.
    pub fn ms_decay_exponent(&self, burn_in: f64) -> Result<f64> {
        log_slope(&self.times, &self.ms_disagreement, burn_in)
    }

    pub fn summary(&self) -> Summary {
        let last = self.times.len() - 1;
        Summary {
            trials: self.trials,
            diverged: self.diverged,
            final_time: self.times[last],
            initial_ms_disagreement: self.ms_disagreement[0],
            final_ms_disagreement: self.ms_disagreement[last],
            final_max_pairwise_ms: self.max_pairwise_ms[last],
            ms_decay_exponent: self
                .ms_decay_exponent(DEFAULT_BURN_IN * self.times[last])
                .unwrap_or(f64::NEG_INFINITY),
            as_rate_mean: self.as_rate.mean,
            as_rate_q05: self.as_rate.q05,
            as_rate_median: self.as_rate.median,
            as_rate_q95: self.as_rate.q95,
            centroid_mean_initial: self.centroid_mean[0],
            centroid_mean_final: self.centroid_mean[last],
            centroid_var_final: self.centroid_var[last],
        }
    }
}

/// Scalar outcome of an ensemble run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub trials: usize,
    pub diverged: usize,
    pub final_time: f64,
    pub initial_ms_disagreement: f64,
    pub final_ms_disagreement: f64,
    pub final_max_pairwise_ms: f64,
    pub ms_decay_exponent: f64,
    pub as_rate_mean: f64,
    pub as_rate_q05: f64,
    pub as_rate_median: f64,
    pub as_rate_q95: f64,
    pub centroid_mean_initial: f64,
    pub centroid_mean_final: f64,
    pub centroid_var_final: f64,
}

/// `n * sum_ij a_ij^2 pi_i^2 sigma_ji^2 * int_0^t c^2`: the variance of the
/// centroid drift under additive noise.
pub fn martingale_variance_oracle(
    spec: &SpectralData,
    noise: &NoiseModel,
    c: &GainFunction,
    t: f64,
    n_dim: usize,
) -> Result<f64> {
    if !noise.is_additive() {
        return Err(Error::InvalidNoise("the variance oracle needs additive noise".into()));
    }
    let n = spec.n_agents();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = if i == j { 0.0 } else { -spec.laplacian[(i, j)] };
            if a != 0.0 {
                let s = noise.sigma(j, i).unwrap_or(0.0);
                weights.push(a * a * spec.pi[i] * spec.pi[i] * s * s);
            }
        }
    }
    Ok(n_dim as f64 * pairwise_sum(&weights) * c.integral_sq(0.0, t)?)
}

/// Disagreement in modal coordinates: `(phi^T (x) I_n) x` with the consensus
/// mode removed, mode-major (`n_dim` entries per mode).
pub fn modal_disagreement(basis: &ModalBasis, x: &[f64], n_dim: usize) -> Vec<f64> {
    let modes = basis.eigenvalues.len();
    let n = basis.vectors.nrows();
    let mut out = vec![0.0; modes * n_dim];
    for m in 0..modes {
        for i in 0..n {
            let w = basis.vectors[(i, m)];
            for d in 0..n_dim {
                out[m * n_dim + d] += w * x[i * n_dim + d];
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyapunovSample {
    pub t: f64,
    pub value: f64,
}

/// Degenerate Lyapunov functional with `K = k I_n`:
///
/// ```text
/// V = int_{-tau1}^0 int_{t+s}^t  y' (Lambda^2 k^2) y  dtheta ds
///   + || y(t) - k Lambda int_{t-tau1}^t y(s) ds ||^2
/// ```
///
/// `window` holds `y` on the `dt` grid over `[t - tau1, t]`, oldest first.
/// Both integrals use the trapezoidal rule.
pub fn lyapunov_eval(
    window: &[Vec<f64>],
    lambdas: &[f64],
    k: f64,
    tau1: f64,
    dt: f64,
    t: f64,
) -> Result<LyapunovSample> {
    let lag = if tau1 == 0.0 {
        0
    } else {
        crate::numeric::aligned_steps(tau1, dt)
            .ok_or_else(|| Error::Config(format!("tau1 = {tau1} is not a multiple of dt = {dt}")))?
    };
    if window.len() < lag + 1 {
        return Err(Error::HistoryUnderflow {
            lag,
            available: window.len().saturating_sub(1),
        });
    }
    let window = &window[window.len() - lag - 1..];
    let width = window[0].len();
    let n_dim = width / lambdas.len().max(1);
    let weight = |e: usize| lambdas[e / n_dim] * k;
    let quad: Vec<f64> = window
        .iter()
        .map(|y| (0..width).map(|e| (weight(e) * y[e]).powi(2)).sum())
        .collect();

    // G(s) = int_{t+s}^t q, accumulated backwards from theta = t.
    let mut inner = vec![0.0; lag + 1];
    for p in (0..lag).rev() {
        inner[p] = inner[p + 1] + 0.5 * dt * (quad[p] + quad[p + 1]);
    }
    let double = trapezoid(&inner, dt);

    let mut integral = vec![0.0; width];
    for e in 0..width {
        let col: Vec<f64> = window.iter().map(|y| y[e]).collect();
        integral[e] = trapezoid(&col, dt);
    }
    let now = &window[lag];
    let residual: f64 = (0..width).map(|e| (now[e] - weight(e) * integral[e]).powi(2)).sum();
    Ok(LyapunovSample {
        t,
        value: double + residual,
    })
}

fn trapezoid(v: &[f64], dt: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let inner: Vec<f64> = v[1..v.len() - 1].to_vec();
    dt * (0.5 * (v[0] + v[v.len() - 1]) + pairwise_sum(&inner))
}
