//! Euler–Maruyama integration of the delayed consensus dynamics
//!
//! ```text
//! dx_i = c(t) sum_j a_ij (x_j(t - tau1) - x_i(t - tau1)) dt
//!      + c(t) sum_j a_ij f_ji(x_j(t - tau2) - x_i(t - tau2)) dw_ji
//! ```
//!
//! Both delays must be whole multiples of `dt`, so delayed states are read
//! straight out of a ring buffer without interpolation.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gains::GainFunction;
use crate::graph::{stationary_distribution, Digraph};
use crate::metrics::{self, EnsembleStats, TrialSeries};
use crate::noise::{IncrementSource, NoiseModel, NoiseStream};
use crate::numeric::aligned_steps;

/// States with Euclidean norm above this are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_STRIDE: usize = 100;

/// Initial function `psi` on `[-max(tau1, tau2), 0]`, stacked agent-major
/// (`N * n` entries, agent `i` at `i*n .. (i+1)*n`).
#[derive(Clone, Debug, PartialEq)]
pub enum History {
    /// `psi(theta) = x0` for every `theta`.
    Constant(Vec<f64>),
    /// Piecewise-linear through `(times[k], states[k])`; `times` ascending and
    /// covering the delay window, with the last entry at `0`.
    Tabulated { times: Vec<f64>, states: Vec<Vec<f64>> },
}

impl History {
    pub fn width(&self) -> usize {
        match self {
            Self::Constant(x) => x.len(),
            Self::Tabulated { states, .. } => states.first().map_or(0, Vec::len),
        }
    }

    pub fn initial(&self) -> Vec<f64> {
        match self {
            Self::Constant(x) => x.clone(),
            Self::Tabulated { states, .. } => states.last().cloned().unwrap_or_default(),
        }
    }

    fn validate(&self, width: usize, window: f64) -> Result<()> {
        if self.width() != width {
            return Err(Error::Config(format!(
                "history has {} entries per state, expected {width}",
                self.width()
            )));
        }
        match self {
            Self::Constant(x) => {
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("history contains non-finite values".into()));
                }
            }
            Self::Tabulated { times, states } => {
                if times.len() != states.len() || times.is_empty() {
                    return Err(Error::Config("history times and states differ in length".into()));
                }
                if states
                    .iter()
                    .any(|s| s.len() != width || s.iter().any(|v| !v.is_finite()))
                {
                    return Err(Error::Config("history states are ragged or non-finite".into()));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("history times must increase strictly".into()));
                }
                if *times.last().unwrap() != 0.0 {
                    return Err(Error::Config("history must end at t = 0".into()));
                }
                if times[0] > -window + 1e-12 * window.max(1.0) && window > 0.0 {
                    return Err(Error::Config(format!(
                        "history starts at {} but the delay window reaches {}",
                        times[0], -window
                    )));
                }
            }
        }
        Ok(())
    }

    /// `psi(theta)` for `theta <= 0`.
    fn at(&self, theta: f64) -> Vec<f64> {
        match self {
            Self::Constant(x) => x.clone(),
            Self::Tabulated { times, states } => {
                let k = times.partition_point(|&t| t <= theta);
                if k == 0 {
                    return states[0].clone();
                }
                if k == times.len() {
                    return states[k - 1].clone();
                }
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (theta - t0) / (t1 - t0);
                states[k - 1]
                    .iter()
                    .zip(&states[k])
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }
}

/// Everything needed to run the simulator.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub graph: Digraph,
    pub tau1: f64,
    pub tau2: f64,
    pub dt: f64,
    pub horizon: f64,
    /// State dimension per agent.
    pub n_dim: usize,
    pub gain: GainFunction,
    pub noise: NoiseModel,
    pub trials: usize,
    pub seed: u64,
    pub history: History,
    /// Record every `stride`-th step (the final step is always recorded).
    pub stride: usize,
}

/// Grid quantities derived from a validated [`SimConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub lag1: usize,
    pub lag2: usize,
    pub steps: usize,
}

impl Grid {
    pub fn max_lag(&self) -> usize {
        self.lag1.max(self.lag2)
    }
}

impl SimConfig {
    /// Scalar agents, no delays, `dt = 1e-3`, one trial, seed 0.
    pub fn new(graph: Digraph, gain: GainFunction, noise: NoiseModel, history: History) -> Self {
        Self {
            graph,
            tau1: 0.0,
            tau2: 0.0,
            dt: DEFAULT_DT,
            horizon: 1.0,
            n_dim: 1,
            gain,
            noise,
            trials: 1,
            seed: 0,
            history,
            stride: DEFAULT_STRIDE,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.graph.n_agents()
    }

    pub fn validate(&self) -> Result<Grid> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon {} must be finite and at least dt = {}",
                self.horizon, self.dt
            )));
        }
        for (name, tau) in [("tau1", self.tau1), ("tau2", self.tau2)] {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        let lag = |name: &str, tau: f64| {
            aligned_steps(tau, self.dt)
                .ok_or_else(|| Error::Config(format!("{name} = {tau} is not a multiple of dt = {}", self.dt)))
        };
        let lag1 = lag("tau1", self.tau1)?;
        let lag2 = lag("tau2", self.tau2)?;
        let steps = (self.horizon / self.dt - 1e-9).ceil() as usize;
        if self.n_dim == 0 {
            return Err(Error::Config("state dimension must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if let Some(n) = self.noise.n_agents() {
            if n != self.n_agents() {
                return Err(Error::Config(format!(
                    "noise model is sized for {n} agents, graph has {}",
                    self.n_agents()
                )));
            }
        }
        let grid = Grid { lag1, lag2, steps };
        self.history
            .validate(self.n_agents() * self.n_dim, grid.max_lag() as f64 * self.dt)?;
        Ok(grid)
    }

    /// Recorded step indices: multiples of `stride` plus the final step.
    pub fn record_steps(&self, steps: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..=steps).step_by(self.stride).collect();
        if *out.last().unwrap() != steps {
            out.push(steps);
        }
        out
    }
}

/// Ring buffer of the last `capacity` states.
#[derive(Clone, Debug)]
pub struct DelayBuffer {
    width: usize,
    capacity: usize,
    data: Vec<f64>,
    newest: usize,
    len: usize,
}

impl DelayBuffer {
    pub fn new(width: usize, capacity: usize) -> Self {
        assert!(capacity >= 1, "buffer needs room for the current state");
        Self {
            width,
            capacity,
            data: vec![0.0; width * capacity],
            newest: capacity - 1,
            len: 0,
        }
    }

    pub fn push(&mut self, state: &[f64]) {
        debug_assert_eq!(state.len(), self.width);
        self.newest = (self.newest + 1) % self.capacity;
        let at = self.newest * self.width;
        self.data[at..at + self.width].copy_from_slice(state);
        self.len = (self.len + 1).min(self.capacity);
    }

    /// State `lag` steps behind the newest one.
    pub fn lag(&self, lag: usize) -> Result<&[f64]> {
        if lag >= self.len {
            return Err(Error::HistoryUnderflow {
                lag,
                available: self.len.saturating_sub(1),
            });
        }
        let slot = (self.newest + self.capacity - lag) % self.capacity;
        Ok(&self.data[slot * self.width..(slot + 1) * self.width])
    }

    pub fn newest(&self) -> Result<&[f64]> {
        self.lag(0)
    }
}

/// `out_i = c * sum_j a_ij (x_j - x_i)` evaluated on the state `lag` steps back.
pub fn step_drift_into(
    g: &Digraph,
    history: &DelayBuffer,
    lag: usize,
    c: f64,
    n_dim: usize,
    out: &mut [f64],
) -> Result<()> {
    let nbrs = neighbor_lists(g);
    drift_into(&nbrs, history.lag(lag)?, c, n_dim, out);
    Ok(())
}

fn neighbor_lists(g: &Digraph) -> Vec<Vec<usize>> {
    (0..g.n_agents()).map(|i| g.neighbors(i)).collect()
}

fn drift_into(nbrs: &[Vec<usize>], x: &[f64], c: f64, n_dim: usize, out: &mut [f64]) {
    out.fill(0.0);
    for (i, list) in nbrs.iter().enumerate() {
        let xi = &x[i * n_dim..(i + 1) * n_dim];
        let oi = &mut out[i * n_dim..(i + 1) * n_dim];
        for &j in list {
            let xj = &x[j * n_dim..(j + 1) * n_dim];
            for d in 0..n_dim {
                oi[d] += xj[d] - xi[d];
            }
        }
        oi.iter_mut().for_each(|v| *v *= c);
    }
}

/// Drift `-c (L (x) I_n) x(t - tau1)`.
pub fn step_drift(g: &Digraph, history: &DelayBuffer, lag: usize, c: f64, n_dim: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; g.n_agents() * n_dim];
    step_drift_into(g, history, lag, c, n_dim, &mut out)?;
    Ok(out)
}

/// Diffusion `c * sum_j a_ij f_ji(Delta_ji(t - tau2)) dw_ji` per agent;
/// `increments[k]` belongs to channel `g.channels()[k]`.
pub fn step_diffusion(
    g: &Digraph,
    history: &DelayBuffer,
    lag: usize,
    c: f64,
    noise: &NoiseModel,
    increments: &[f64],
    n_dim: usize,
) -> Result<Vec<f64>> {
    let channels = g.channels();
    if increments.len() != channels.len() {
        return Err(Error::Config(format!(
            "{} increments supplied for {} channels",
            increments.len(),
            channels.len()
        )));
    }
    let mut out = vec![0.0; g.n_agents() * n_dim];
    let mut scratch = Scratch::new(n_dim);
    add_diffusion(
        &channels,
        history,
        lag,
        c,
        noise,
        increments,
        n_dim,
        &mut scratch,
        &mut out,
    )?;
    Ok(out)
}

struct Scratch {
    delta: Vec<f64>,
    intensity: Vec<f64>,
}

impl Scratch {
    fn new(n_dim: usize) -> Self {
        Self {
            delta: vec![0.0; n_dim],
            intensity: vec![0.0; n_dim],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn add_diffusion(
    channels: &[(usize, usize)],
    history: &DelayBuffer,
    lag: usize,
    c: f64,
    noise: &NoiseModel,
    increments: &[f64],
    n_dim: usize,
    scratch: &mut Scratch,
    out: &mut [f64],
) -> Result<()> {
    let x = history.lag(lag)?;
    for (&(j, i), &dw) in channels.iter().zip(increments) {
        for d in 0..n_dim {
            scratch.delta[d] = x[j * n_dim + d] - x[i * n_dim + d];
        }
        noise.intensity_into(j, i, &scratch.delta, &mut scratch.intensity)?;
        let scale = c * dw;
        for d in 0..n_dim {
            out[i * n_dim + d] += scale * scratch.intensity[d];
        }
    }
    Ok(())
}

/// Recorded sample path of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub n_agents: usize,
    pub n_dim: usize,
    pub times: Vec<f64>,
    /// Stacked states `x(t)`, one per recorded time.
    pub states: Vec<Vec<f64>>,
    /// `pi^T x(t)` per recorded time (one entry per state component).
    pub centroid: Vec<Vec<f64>>,
    /// Time at which `||x|| > 1e12` (or a non-finite value) was first seen.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn csv_header(n_agents: usize, n_dim: usize) -> String {
        let mut h = String::from("t");
        for i in 1..=n_agents {
            for d in 1..=n_dim {
                h.push_str(&format!(",agent_{i}_{d}"));
            }
        }
        h
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::csv_header(self.n_agents, self.n_dim))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in x {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Precomputed per-run data shared by all trials.
struct Runner<'a> {
    config: &'a SimConfig,
    grid: Grid,
    channels: Vec<(usize, usize)>,
    nbrs: Vec<Vec<usize>>,
    record: Vec<usize>,
    psi: Vec<Vec<f64>>,
}

impl<'a> Runner<'a> {
    fn new(config: &'a SimConfig) -> Result<Self> {
        let grid = config.validate()?;
        let max_lag = grid.max_lag();
        // psi on the grid -max_lag*dt .. 0, oldest first
        let psi = (0..=max_lag)
            .map(|k| config.history.at(-((max_lag - k) as f64) * config.dt))
            .collect();
        Ok(Self {
            config,
            grid,
            channels: config.graph.channels(),
            nbrs: neighbor_lists(&config.graph),
            record: config.record_steps(grid.steps),
            psi,
        })
    }

    /// Runs one trial, calling `observe(record_index, t, x)` at recorded steps.
    /// Returns the divergence time, if any.
    fn run<F>(&self, trial: u32, mut observe: F) -> Result<Option<f64>>
    where
        F: FnMut(usize, f64, &[f64]),
    {
        let cfg = self.config;
        let n_dim = cfg.n_dim;
        let width = cfg.n_agents() * n_dim;
        let mut buf = DelayBuffer::new(width, self.grid.max_lag() + 1);
        for state in &self.psi {
            buf.push(state);
        }
        let noisy = !cfg.noise.is_silent() && !self.channels.is_empty();
        let mut sources: Vec<IncrementSource> = if noisy {
            self.channels
                .iter()
                .map(|&(j, i)| NoiseStream::for_channel(cfg.seed, trial, j, i, cfg.n_agents()).source())
                .collect()
        } else {
            Vec::new()
        };
        let sqrt_dt = cfg.dt.sqrt();
        let mut increments = vec![0.0; sources.len()];
        let mut drift = vec![0.0; width];
        let mut next = vec![0.0; width];
        let mut scratch = Scratch::new(n_dim);
        let mut rec = 0;

        if self.record[0] == 0 {
            observe(0, 0.0, buf.newest()?);
            rec = 1;
        }
        for m in 0..self.grid.steps {
            let t = m as f64 * cfg.dt;
            let c = cfg.gain.eval(t)?;
            drift_into(&self.nbrs, buf.lag(self.grid.lag1)?, c, n_dim, &mut drift);
            next.copy_from_slice(buf.newest()?);
            for (v, d) in next.iter_mut().zip(&drift) {
                *v += d * cfg.dt;
            }
            if noisy {
                for (dw, src) in increments.iter_mut().zip(sources.iter_mut()) {
                    *dw = src.next_increment(sqrt_dt);
                }
                add_diffusion(
                    &self.channels,
                    &buf,
                    self.grid.lag2,
                    c,
                    &cfg.noise,
                    &increments,
                    n_dim,
                    &mut scratch,
                    &mut next,
                )?;
            }
            buf.push(&next);
            let t_next = (m + 1) as f64 * cfg.dt;
            let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm <= DIVERGENCE_NORM) {
                return Ok(Some(t_next));
            }
            if rec < self.record.len() && self.record[rec] == m + 1 {
                observe(rec, t_next, &next);
                rec += 1;
            }
        }
        Ok(None)
    }
}

fn centroid_of(pi: &[f64], x: &[f64], n_dim: usize) -> Vec<f64> {
    (0..n_dim)
        .map(|d| pi.iter().enumerate().map(|(i, p)| p * x[i * n_dim + d]).sum())
        .collect()
}

/// Runs trial 0 of `config` and returns its recorded path.
pub fn simulate(config: &SimConfig) -> Result<Trajectory> {
    simulate_trial(config, 0)
}

pub fn simulate_trial(config: &SimConfig, trial: u32) -> Result<Trajectory> {
    let runner = Runner::new(config)?;
    let pi = stationary_distribution(&config.graph)?;
    let mut traj = Trajectory {
        n_agents: config.n_agents(),
        n_dim: config.n_dim,
        times: Vec::with_capacity(runner.record.len()),
        states: Vec::with_capacity(runner.record.len()),
        centroid: Vec::with_capacity(runner.record.len()),
        diverged_at: None,
    };
    traj.diverged_at = runner.run(trial, |_, t, x| {
        traj.times.push(t);
        traj.states.push(x.to_vec());
        traj.centroid.push(centroid_of(&pi, x, config.n_dim));
    })?;
    Ok(traj)
}

/// Runs `config.trials` independent trials on `workers` threads and
/// aggregates them. The output does not depend on `workers`.
pub fn simulate_ensemble(config: &SimConfig, workers: usize) -> Result<EnsembleStats> {
    let runner = Runner::new(config)?;
    let pi = Arc::new(stationary_distribution(&config.graph)?);
    let times: Vec<f64> = runner.record.iter().map(|&m| m as f64 * config.dt).collect();
    let burn_in = metrics::DEFAULT_BURN_IN * config.horizon;
    let run_one = |trial: usize| -> Result<TrialSeries> {
        let mut series = TrialSeries::new(config.n_agents(), config.n_dim, times.len());
        let diverged = runner.run(trial as u32, |_, _, x| series.observe(&pi, x))?;
        series.finish(&times, burn_in, diverged);
        Ok(series)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let series: Vec<TrialSeries> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(metrics::aggregate(&times, &series))
}
