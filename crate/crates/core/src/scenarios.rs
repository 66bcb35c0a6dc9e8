//! Eight built-in four-agent experiments, `fig1` .. `fig8`.
//!
//! All share the initial state `(-7, 4, 3, -8)` held constant on the delay
//! window and noise intensity 2 on every channel. `fig1`/`fig2` use the
//! directed graph with additive noise; `fig3`..`fig8` add `a_21 = 1` to make
//! it undirected and use linear multiplicative noise with a constant gain.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gains::GainFunction;
use crate::graph::{example_directed, example_undirected};
use crate::noise::NoiseModel;
use crate::sdde::{History, SimConfig};

pub const INITIAL_STATE: [f64; 4] = [-7.0, 4.0, 3.0, -8.0];
pub const SIGMA: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Self::Fig1,
        Self::Fig2,
        Self::Fig3,
        Self::Fig4,
        Self::Fig5,
        Self::Fig6,
        Self::Fig7,
        Self::Fig8,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
            Self::Fig6 => "fig6",
            Self::Fig7 => "fig7",
            Self::Fig8 => "fig8",
        }
    }

    pub fn is_additive(self) -> bool {
        matches!(self, Self::Fig1 | Self::Fig2)
    }

    /// `(tau1, tau2)`.
    pub fn delays(self) -> (f64, f64) {
        match self {
            Self::Fig1 | Self::Fig2 | Self::Fig4 => (0.2, 0.0),
            Self::Fig3 => (0.2, 2.0),
            Self::Fig5 => (0.2, 10.0),
            Self::Fig6 => (0.2, 100.0),
            Self::Fig7 | Self::Fig8 => (3.5, 0.0),
        }
    }

    pub fn gain(self) -> GainFunction {
        let g = match self {
            Self::Fig1 => GainFunction::power_law(1.0, 1.0),
            Self::Fig2 => GainFunction::power_law(1.0, 1.0 / 3.0),
            Self::Fig8 => GainFunction::constant(0.013),
            _ => GainFunction::constant(0.12),
        };
        g.expect("scenario gains are valid")
    }

    /// Default horizon, long enough for each run to settle (or blow up).
    pub fn horizon(self) -> f64 {
        match self {
            Self::Fig1 | Self::Fig2 => 200.0,
            Self::Fig3 | Self::Fig4 | Self::Fig5 => 100.0,
            Self::Fig6 => 300.0,
            Self::Fig7 => 50.0,
            Self::Fig8 => 400.0,
        }
    }

    /// Simulation config for the scenario; `dt = 1e-3`.
    pub fn config(self) -> SimConfig {
        let graph = if self.is_additive() {
            example_directed()
        } else {
            example_undirected()
        };
        let n = graph.n_agents();
        let noise = if self.is_additive() {
            NoiseModel::additive(n, SIGMA)
        } else {
            NoiseModel::multiplicative_linear(n, SIGMA)
        }
        .expect("scenario noise is valid");
        let mut cfg = SimConfig::new(graph, self.gain(), noise, History::Constant(INITIAL_STATE.to_vec()));
        (cfg.tau1, cfg.tau2) = self.delays();
        cfg.horizon = self.horizon();
        cfg
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.id() == s.trim())
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}
