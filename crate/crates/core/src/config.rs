//! Flat `key = value` experiment files.
//!
//! ```text
//! # fig1 rerun
//! name    = additive-decaying
//! graph   = graphs/directed.txt
//! gain    = power:a=1,beta=1
//! noise   = additive:sigma=2
//! initial = -7, 4, 3, -8
//! tau1    = 0.2
//! horizon = 200
//! trials  = 100
//! ```
//!
//! Relative paths (including `table:` gains and `file=` noise matrices)
//! resolve against the directory holding the file.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gains::{parse_number, GainSpec};
use crate::graph::parse_edge_list;
use crate::noise::NoiseSpec;
use crate::sdde::{History, SimConfig, DEFAULT_DT, DEFAULT_STRIDE};

/// A value together with the directory its relative paths resolve against.
#[derive(Clone, Debug, PartialEq)]
pub struct Sourced<T> {
    pub value: T,
    pub base: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub graph: Option<PathBuf>,
    pub gain: Option<Sourced<String>>,
    pub noise: Option<Sourced<String>>,
    pub initial: Option<Vec<f64>>,
    pub dim: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub dt: f64,
    pub horizon: f64,
    pub trials: usize,
    pub seed: u64,
    pub stride: usize,
    pub out: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            graph: None,
            gain: None,
            noise: None,
            initial: None,
            dim: 1,
            tau1: 0.0,
            tau2: 0.0,
            dt: DEFAULT_DT,
            horizon: 1.0,
            trials: 1,
            seed: 0,
            stride: DEFAULT_STRIDE,
            out: PathBuf::from("out"),
        }
    }
}

const KEYS: &[&str] = &[
    "name", "graph", "gain", "noise", "initial", "dim", "tau1", "tau2", "dt", "horizon", "trials", "seed", "stride",
    "out",
];

/// Comma- or whitespace-separated list of numbers.
pub fn parse_vector(text: &str) -> Option<Vec<f64>> {
    let v: Option<Vec<f64>> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_number)
        .collect();
    v.filter(|v| !v.is_empty())
}

impl ExperimentSpec {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    pub fn parse(text: &str, source_name: &str, base: &Path) -> Result<Self> {
        let mut spec = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let indent = content.len() - content.trim_start().len();
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(source_name, line_no, indent + 1, "expected 'key = value'"))?;
            let key_name = key.trim();
            let Some(&key_static) = KEYS.iter().find(|k| **k == key_name) else {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    indent + 1,
                    format!("unknown key '{key_name}'"),
                ));
            };
            if seen.contains(&key_static) {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    indent + 1,
                    format!("duplicate key '{key_name}'"),
                ));
            }
            seen.push(key_static);
            let value_col = key.len() + 2 + (value.len() - value.trim_start().len());
            let value = value.trim();
            let bad = |what: &str| Error::parse(source_name, line_no, value_col, format!("{key_name}: {what}"));
            let number = || parse_number(value).ok_or_else(|| bad("expected a number"));
            let count = || -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| bad("expected a nonnegative integer"))
            };
            match key_static {
                "name" => spec.name = value.to_string(),
                "graph" => spec.graph = Some(base.join(value)),
                "gain" => {
                    GainSpec::parse(value).map_err(|e| bad(&e.to_string()))?;
                    spec.gain = Some(Sourced {
                        value: value.to_string(),
                        base: base.to_path_buf(),
                    });
                }
                "noise" => {
                    NoiseSpec::parse(value).map_err(|e| bad(&e.to_string()))?;
                    spec.noise = Some(Sourced {
                        value: value.to_string(),
                        base: base.to_path_buf(),
                    });
                }
                "initial" => spec.initial = Some(parse_vector(value).ok_or_else(|| bad("expected numbers"))?),
                "dim" => spec.dim = count()?,
                "tau1" => spec.tau1 = number()?,
                "tau2" => spec.tau2 = number()?,
                "dt" => spec.dt = number()?,
                "horizon" => spec.horizon = number()?,
                "trials" => spec.trials = count()?,
                "seed" => spec.seed = value.parse().map_err(|_| bad("expected an unsigned integer"))?,
                "stride" => spec.stride = count()?,
                "out" => spec.out = base.join(value),
                _ => unreachable!(),
            }
        }
        Ok(spec)
    }

    /// Loads every referenced file and builds a validated [`SimConfig`].
    pub fn to_sim_config(&self) -> Result<SimConfig> {
        let graph_path = self
            .graph
            .as_ref()
            .ok_or_else(|| Error::Config("no graph given".into()))?;
        let text = std::fs::read_to_string(graph_path).map_err(|e| Error::io(graph_path, e))?;
        let graph = parse_edge_list(&text, &graph_path.display().to_string())?;
        let gain = self
            .gain
            .as_ref()
            .ok_or_else(|| Error::Config("no gain given".into()))?;
        let gain = GainSpec::parse(&gain.value)?.load(&gain.base)?;
        let noise = match &self.noise {
            Some(n) => NoiseSpec::parse(&n.value)?.load(graph.n_agents(), &n.base)?,
            None => NoiseSpec::None.load(graph.n_agents(), Path::new("."))?,
        };
        let initial = self
            .initial
            .clone()
            .ok_or_else(|| Error::Config("no initial state given".into()))?;
        let want = graph.n_agents() * self.dim;
        if initial.len() != want {
            return Err(Error::Config(format!(
                "initial state has {} entries, expected {want} ({} agents x dim {})",
                initial.len(),
                graph.n_agents(),
                self.dim
            )));
        }
        let mut cfg = SimConfig::new(graph, gain, noise, History::Constant(initial));
        cfg.n_dim = self.dim;
        cfg.tau1 = self.tau1;
        cfg.tau2 = self.tau2;
        cfg.dt = self.dt;
        cfg.horizon = self.horizon;
        cfg.trials = self.trials;
        cfg.seed = self.seed;
        cfg.stride = self.stride;
        cfg.validate()?;
        Ok(cfg)
    }
}
