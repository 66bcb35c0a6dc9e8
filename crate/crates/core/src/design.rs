//! Design-side quantities: the additive-noise delay margin, the admissible
//! gain interval and guaranteed rate for multiplicative noise, and the
//! necessity bound on the gain.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gains::GainFunction;
use crate::graph::{SpectralData, ZERO_EIG_TOL};
use crate::numeric::bisect_increasing;

/// `(margin < 1, margin)` with `margin = tau1 * c_bar_{t0} * max_j |lambda_j|^2 / Re(lambda_j)`.
pub fn additive_delay_check(spec: &SpectralData, c: &GainFunction, tau1: f64, t0: f64) -> Result<(bool, f64)> {
    if !spec.has_spanning_tree {
        return Err(Error::NoSpanningTree);
    }
    if tau1 == 0.0 {
        return Ok((true, 0.0));
    }
    let margin = tau1 * c.tail_sup(t0)? * spec.delay_sensitivity();
    Ok((margin < 1.0, margin))
}

fn undirected_extremes(spec: &SpectralData) -> Result<(f64, f64)> {
    if !spec.is_undirected {
        return Err(Error::GraphNotUndirected);
    }
    match (spec.lambda2, spec.lambda_n) {
        (Some(l2), Some(ln)) if l2 > ZERO_EIG_TOL => Ok((l2, ln)),
        _ => Err(Error::NotConnected),
    }
}

/// Upper end of the admissible gain interval `(0, k_max)`:
/// `k_max = 1 / (lambda_N tau1 + (N-1)/N sigma_bar^2)`, `+inf` when the
/// denominator vanishes.
pub fn mult_gain_interval(spec: &SpectralData, tau1: f64, sigma_bar: f64, n_agents: usize) -> Result<f64> {
    let (_, lambda_n) = undirected_extremes(spec)?;
    let n = n_agents as f64;
    let den = lambda_n * tau1 + (n - 1.0) / n * sigma_bar * sigma_bar;
    Ok(if den > 0.0 { 1.0 / den } else { f64::INFINITY })
}

/// Left side of the equation defining `gamma_tau2`; decreasing in `gamma`.
#[allow(clippy::too_many_arguments)]
pub fn gamma_equation(
    gamma: f64,
    k: f64,
    tau1: f64,
    tau2: f64,
    sigma_bar: f64,
    n_agents: usize,
    lambda2: f64,
    lambda_n: f64,
) -> f64 {
    let n = n_agents as f64;
    let noise = (n - 1.0) / n * k * sigma_bar * sigma_bar * (gamma * tau2).exp();
    2.0 * k * (1.0 - noise - lambda_n * k * tau1) * lambda2
        - 2.0 * gamma
        - 3.0 * lambda_n * lambda_n * k * k * tau1 * tau1 * gamma * (gamma * tau1).exp()
}

/// Guaranteed mean-square decay rate: the positive root of [`gamma_equation`].
pub fn gamma_tau2(spec: &SpectralData, k: f64, tau1: f64, tau2: f64, sigma_bar: f64, n_agents: usize) -> Result<f64> {
    let (lambda2, lambda_n) = undirected_extremes(spec)?;
    gamma_from_extremes(k, tau1, tau2, sigma_bar, n_agents, lambda2, lambda_n)
}

/// [`gamma_tau2`] from the extreme eigenvalues directly.
pub fn gamma_from_extremes(
    k: f64,
    tau1: f64,
    tau2: f64,
    sigma_bar: f64,
    n_agents: usize,
    lambda2: f64,
    lambda_n: f64,
) -> Result<f64> {
    let n = n_agents as f64;
    let den = lambda_n * tau1 + (n - 1.0) / n * sigma_bar * sigma_bar;
    let k_max = if den > 0.0 { 1.0 / den } else { f64::INFINITY };
    if !(k > 0.0 && k < k_max) {
        return Err(Error::GainOutOfRange { k, k_max });
    }
    let h = |g: f64| gamma_equation(g, k, tau1, tau2, sigma_bar, n_agents, lambda2, lambda_n);
    // bisect to floating-point resolution so the residual is as small as the slope allows
    bisect_increasing(|g| -h(g), 0.0, k * lambda2, 1e6, 0.0)
}

/// Necessary gain bound `N / (sigma_min^2 (N - 1))`; `+inf` for `sigma_min = 0`.
pub fn necessity_bound(sigma_min: f64, n_agents: usize) -> f64 {
    let n = n_agents as f64;
    if sigma_min == 0.0 {
        f64::INFINITY
    } else {
        n / (sigma_min * sigma_min * (n - 1.0))
    }
}

/// Everything the `design` command reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignResult {
    pub additive_feasible: Option<bool>,
    pub additive_margin: Option<f64>,
    pub mult_k_max: Option<f64>,
    pub gamma_tau2: Option<f64>,
    pub necessity_k_max: Option<f64>,
}
