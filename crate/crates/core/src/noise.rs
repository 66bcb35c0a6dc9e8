//! Measurement-noise models and the Brownian increments that drive them.
//!
//! Every channel `(j, i)` (agent `i` measuring agent `j`) owns an independent
//! Brownian motion `w_ji`. Increments come from a ChaCha8 keystream keyed by
//! the run seed, with the stream id packing `(trial, channel)` and the block
//! counter indexing the time step. Any increment is therefore a pure
//! function of `(seed, trial, channel, step)`, regardless of how trials are
//! spread over threads.
//!
//! Gaussian draws use the cosine branch of Box–Muller on two 53-bit uniforms,
//! consuming exactly two `u64` words (four 32-bit keystream words) per step.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::gains::{lookup, parse_number, parse_params};
use crate::graph::{tokens_with_columns, Digraph};

const WORDS_PER_STEP: u128 = 4;

/// Custom multiplicative intensity `f_ji(delta)`: arguments are the channel
/// `(j, i)`, the delayed relative state, and the output buffer.
pub type IntensityFn = Arc<dyn Fn(usize, usize, &[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum Multiplicative {
    /// `f_ji(x) = sigma_ji * x`.
    Linear { sigma: DMatrix<f64> },
    /// User-supplied intensity, checked against the declared bound at each call.
    Custom(IntensityFn),
}

/// Noise intensities. Matrices are indexed `[(j, i)]`: row = transmitting
/// agent, column = receiving agent.
#[derive(Clone)]
pub enum NoiseModel {
    /// `f_ji(x) = sigma_ji 1_n`.
    Additive { sigma: DMatrix<f64> },
    /// `||f_ji(x)|| <= bound ||x||` with `f_ji(0) = 0`.
    Multiplicative { kind: Multiplicative, bound: f64 },
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Additive { sigma } => f.debug_struct("Additive").field("sigma", sigma).finish(),
            Self::Multiplicative { kind, bound } => {
                let mut d = f.debug_struct("Multiplicative");
                match kind {
                    Multiplicative::Linear { sigma } => d.field("sigma", sigma),
                    Multiplicative::Custom(_) => d.field("intensity", &"<custom>"),
                };
                d.field("bound", bound).finish()
            }
        }
    }
}

fn check_sigma(sigma: &DMatrix<f64>, n_agents: usize) -> Result<()> {
    if sigma.nrows() != n_agents || sigma.ncols() != n_agents {
        return Err(Error::InvalidNoise(format!(
            "sigma matrix is {}x{}, expected {n_agents}x{n_agents}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidNoise(
            "sigma entries must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

impl NoiseModel {
    /// Homogeneous additive noise `sigma_ji = sigma` on every channel.
    pub fn additive(n_agents: usize, sigma: f64) -> Result<Self> {
        Self::additive_matrix(DMatrix::from_element(n_agents, n_agents, sigma))
    }

    pub fn additive_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        check_sigma(&sigma, sigma.nrows())?;
        Ok(Self::Additive { sigma })
    }

    /// Homogeneous linear multiplicative noise with bound `sigma`.
    pub fn multiplicative_linear(n_agents: usize, sigma: f64) -> Result<Self> {
        Self::multiplicative_matrix(DMatrix::from_element(n_agents, n_agents, sigma), None)
    }

    /// Linear multiplicative noise; `bound` defaults to `max sigma_ji` and
    /// must not be smaller.
    pub fn multiplicative_matrix(sigma: DMatrix<f64>, bound: Option<f64>) -> Result<Self> {
        check_sigma(&sigma, sigma.nrows())?;
        let max = sigma.iter().copied().fold(0.0, f64::max);
        let bound = bound.unwrap_or(max);
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidNoise(format!("invalid bound {bound}")));
        }
        if bound < max {
            return Err(Error::InvalidNoise(format!(
                "declared bound {bound} is below the largest sigma {max}"
            )));
        }
        Ok(Self::Multiplicative {
            kind: Multiplicative::Linear { sigma },
            bound,
        })
    }

    pub fn custom(intensity: IntensityFn, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidNoise(format!("invalid bound {bound}")));
        }
        Ok(Self::Multiplicative {
            kind: Multiplicative::Custom(intensity),
            bound,
        })
    }

    /// Zero noise (additive with `sigma = 0`).
    pub fn silent(n_agents: usize) -> Self {
        Self::Additive {
            sigma: DMatrix::zeros(n_agents, n_agents),
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, Self::Additive { .. })
    }

    /// `sigma_ji`, when the model has a matrix form.
    pub fn sigma(&self, j: usize, i: usize) -> Option<f64> {
        match self {
            Self::Additive { sigma }
            | Self::Multiplicative {
                kind: Multiplicative::Linear { sigma },
                ..
            } => Some(sigma[(j, i)]),
            _ => None,
        }
    }

    /// `sigma_bar`: declared linear bound, or the largest additive intensity.
    pub fn bound(&self) -> f64 {
        match self {
            Self::Additive { sigma } => sigma.iter().copied().fold(0.0, f64::max),
            Self::Multiplicative { bound, .. } => *bound,
        }
    }

    /// `sigma_min` over the active channels of `g` (matrix models only).
    pub fn min_sigma(&self, g: &Digraph) -> Option<f64> {
        let channels = g.channels();
        channels
            .iter()
            .map(|&(j, i)| self.sigma(j, i))
            .collect::<Option<Vec<_>>>()
            .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn is_silent(&self) -> bool {
        match self {
            Self::Additive { sigma }
            | Self::Multiplicative {
                kind: Multiplicative::Linear { sigma },
                ..
            } => sigma.iter().all(|s| *s == 0.0),
            Self::Multiplicative { bound, .. } => *bound == 0.0,
        }
    }

    pub fn n_agents(&self) -> Option<usize> {
        match self {
            Self::Additive { sigma }
            | Self::Multiplicative {
                kind: Multiplicative::Linear { sigma },
                ..
            } => Some(sigma.nrows()),
            _ => None,
        }
    }

    /// Intensity `f_ji(delta)` written into `out` (same length as `delta`).
    pub fn intensity_into(&self, j: usize, i: usize, delta: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Self::Additive { sigma } => out.fill(sigma[(j, i)]),
            Self::Multiplicative { kind, bound } => match kind {
                Multiplicative::Linear { sigma } => {
                    let s = sigma[(j, i)];
                    for (o, d) in out.iter_mut().zip(delta) {
                        *o = s * d;
                    }
                }
                Multiplicative::Custom(f) => {
                    f(j, i, delta, out);
                    let norm = l2(out);
                    let limit = bound * l2(delta);
                    if norm > limit + 1e-12 * (1.0 + limit) || !norm.is_finite() {
                        return Err(Error::LinearBoundViolated {
                            from: j,
                            to: i,
                            norm,
                            bound: limit,
                        });
                    }
                }
            },
        }
        Ok(())
    }

    pub fn intensity(&self, j: usize, i: usize, delta: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; delta.len()];
        self.intensity_into(j, i, delta, &mut out)?;
        Ok(out)
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Identifies one Brownian motion: `(seed, trial, channel)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub trial: u32,
    /// Channel index `j * N + i`.
    pub channel: u32,
}

impl NoiseStream {
    pub fn new(seed: u64, trial: u32, channel: u32) -> Self {
        Self { seed, trial, channel }
    }

    /// Stream for channel `(j, i)` of an `n_agents` network.
    pub fn for_channel(seed: u64, trial: u32, j: usize, i: usize, n_agents: usize) -> Self {
        Self::new(seed, trial, (j * n_agents + i) as u32)
    }

    /// Generator positioned at `step`.
    pub fn at_step(&self, step: u64) -> IncrementSource {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((self.trial as u64) << 32) | self.channel as u64);
        rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        IncrementSource { rng }
    }

    pub fn source(&self) -> IncrementSource {
        self.at_step(0)
    }
}

/// Sequential standard-normal draws for one stream.
#[derive(Clone, Debug)]
pub struct IncrementSource {
    rng: ChaCha8Rng,
}

impl IncrementSource {
    #[inline]
    pub fn next_standard_normal(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = ((a >> 11) + 1) as f64 * SCALE;
        let u2 = (b >> 11) as f64 * SCALE;
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// One Brownian increment `N(0, dt)`.
    #[inline]
    pub fn next_increment(&mut self, sqrt_dt: f64) -> f64 {
        sqrt_dt * self.next_standard_normal()
    }
}

/// `steps` i.i.d. `N(0, dt)` increments of `stream`, starting at step 0.
pub fn brownian_increments(stream: &NoiseStream, dt: f64, steps: usize) -> Vec<f64> {
    assert!(dt > 0.0, "dt must be positive");
    let sqrt_dt = dt.sqrt();
    let mut src = stream.source();
    (0..steps).map(|_| src.next_increment(sqrt_dt)).collect()
}

/// Parsed noise specification.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseSpec {
    None,
    Additive { sigma: SigmaSource },
    MultLinear { sigma: SigmaSource, bar: Option<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum SigmaSource {
    Uniform(f64),
    File(PathBuf),
}

impl NoiseSpec {
    /// Parses `none`, `additive:sigma=2`, `mult-linear:sigma=2,bar=2`,
    /// `additive:file=<path>` or `mult-linear:file=<path>[,bar=..]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let src = "noise";
        if spec.trim() == "none" {
            return Ok(Self::None);
        }
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::parse(src, 1, 1, "expected '<kind>:<params>' or 'none'"))?;
        let offset = kind.len() + 2;
        let kind = kind.trim();
        if kind != "additive" && kind != "mult-linear" {
            return Err(Error::parse(
                src,
                1,
                1,
                format!("unknown noise kind '{kind}' (expected additive or mult-linear)"),
            ));
        }
        // A file parameter carries a path, so split it off before numeric parsing.
        let mut file = None;
        let mut numeric = Vec::new();
        let mut col = offset;
        for part in rest.split(',') {
            if let Some(path) = part.trim().strip_prefix("file=") {
                if path.is_empty() || file.is_some() {
                    return Err(Error::parse(src, 1, col, "invalid file parameter"));
                }
                file = Some(PathBuf::from(path));
            } else {
                numeric.push((col, part));
            }
            col += part.len() + 1;
        }
        let mut params = Vec::new();
        for (col, part) in numeric {
            params.extend(parse_params(part, col, src, &["sigma", "bar"])?);
        }
        for (idx, (key, _)) in params.iter().enumerate() {
            if params[..idx].iter().any(|(k, _)| k == key) {
                return Err(Error::parse(src, 1, offset, format!("duplicate parameter '{key}'")));
            }
        }
        let sigma = match (lookup(&params, "sigma"), file) {
            (Some(_), Some(_)) => return Err(Error::parse(src, 1, offset, "give either sigma or file, not both")),
            (Some(s), None) => {
                if s < 0.0 {
                    return Err(Error::parse(src, 1, offset, "sigma must be nonnegative"));
                }
                SigmaSource::Uniform(s)
            }
            (None, Some(p)) => SigmaSource::File(p),
            (None, None) => return Err(Error::parse(src, 1, offset, "missing parameter 'sigma'")),
        };
        let bar = lookup(&params, "bar");
        if let Some(b) = bar {
            if b < 0.0 {
                return Err(Error::parse(src, 1, offset, "bar must be nonnegative"));
            }
        }
        match kind {
            "additive" => {
                if bar.is_some() {
                    return Err(Error::parse(src, 1, offset, "'bar' applies to mult-linear noise only"));
                }
                Ok(Self::Additive { sigma })
            }
            _ => Ok(Self::MultLinear { sigma, bar }),
        }
    }

    pub fn load(&self, n_agents: usize, base_dir: &Path) -> Result<NoiseModel> {
        let matrix = |source: &SigmaSource| -> Result<DMatrix<f64>> {
            match source {
                SigmaSource::Uniform(s) => Ok(DMatrix::from_element(n_agents, n_agents, *s)),
                SigmaSource::File(path) => {
                    let full = base_dir.join(path);
                    let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                    let m = parse_sigma_matrix(&text, &full.display().to_string())?;
                    if m.nrows() != n_agents {
                        return Err(Error::InvalidNoise(format!(
                            "{}: matrix has {} rows, graph has {n_agents} agents",
                            full.display(),
                            m.nrows()
                        )));
                    }
                    Ok(m)
                }
            }
        };
        match self {
            Self::None => Ok(NoiseModel::silent(n_agents)),
            Self::Additive { sigma } => NoiseModel::additive_matrix(matrix(sigma)?),
            Self::MultLinear { sigma, bar } => NoiseModel::multiplicative_matrix(matrix(sigma)?, *bar),
        }
    }
}

/// Parses a square whitespace-separated matrix; row `j`, column `i` holds `sigma_ji`.
pub fn parse_sigma_matrix(text: &str, source_name: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut row = Vec::new();
        for (col, tok) in tokens_with_columns(content) {
            let v = parse_number(tok)
                .ok_or_else(|| Error::parse(source_name, line_no, col, format!("invalid number '{tok}'")))?;
            if v < 0.0 {
                return Err(Error::parse(source_name, line_no, col, "sigma must be nonnegative"));
            }
            row.push(v);
        }
        if row.is_empty() {
            continue;
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    1,
                    format!("row has {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
        if rows.len() > 4096 {
            return Err(Error::parse(source_name, line_no, 1, "matrix too large"));
        }
    }
    let n = rows.len();
    if n < 2 || rows[0].len() != n {
        return Err(Error::parse(
            source_name,
            1,
            1,
            format!("expected a square matrix with at least 2 rows, found {n} rows"),
        ));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}
