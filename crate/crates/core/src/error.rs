use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the library. Each variant maps onto one CLI exit code
/// through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("graph does not contain a spanning tree")]
    NoSpanningTree,

    #[error("graph is not undirected")]
    GraphNotUndirected,

    #[error("graph is not connected")]
    NotConnected,

    #[error("invalid gain: {0}")]
    InvalidGain(String),

    #[error("gain table queried at t = {t} outside its grid [{start}, {end}]")]
    BeyondGrid { t: f64, start: f64, end: f64 },

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("intensity of channel ({from}, {to}) exceeds its declared linear bound: {norm} > {bound}")]
    LinearBoundViolated {
        from: usize,
        to: usize,
        norm: f64,
        bound: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("history buffer does not reach {lag} steps back (holds {available})")]
    HistoryUnderflow { lag: usize, available: usize },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("gain k = {k} is outside the admissible interval (0, {k_max})")]
    GainOutOfRange { k: f64, k_max: f64 },

    #[error("disagreement underflows to zero inside the fitting window")]
    DegenerateWindow,

    #[error("unknown scenario '{0}' (expected fig1..fig8)")]
    UnknownScenario(String),

    #[error("root bracketing failed: {0}")]
    Bracketing(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(
        source_name: impl Into<String>,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 hypothesis failure, 2 input error, 3 numerical trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoSpanningTree
            | Error::GraphNotUndirected
            | Error::NotConnected
            | Error::Infeasible(_)
            | Error::GainOutOfRange { .. } => 1,
            Error::DegenerateSpectrum(_) | Error::Bracketing(_) | Error::DegenerateWindow => 3,
            _ => 2,
        }
    }
}
