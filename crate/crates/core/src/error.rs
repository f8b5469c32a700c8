use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("integration blow-up at t = {time:.4} s (non-finite state)")]
    Blowup { time: f64 },

    #[error("(A, B) pair is not controllable (controllability rank {rank} < {dim})")]
    Uncontrollable { rank: usize, dim: usize },

    #[error("Riccati solver did not converge: {0}")]
    Riccati(String),

    #[error("genome must hold {expected} bits, got {found}")]
    GenomeLength { expected: usize, found: usize },

    #[error("malformed genome data: {0}")]
    GenomeFormat(String),

    #[error("malformed gain data: {0}")]
    GainFormat(String),

    #[error("genome lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("specimen {index} has not been evaluated")]
    Unevaluated { index: usize },

    #[error("SAFE reset failed: state {state:?} not within tolerance after {budget} s")]
    ResetFailed { state: [f64; 4], budget: f64 },

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("switch time M = {switch_time} exceeds episode length T = {horizon}")]
    SwitchAfterHorizon { switch_time: f64, horizon: f64 },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("evaluation failed at generation {generation}, specimen {specimen}: {source}")]
    Evaluation {
        generation: usize,
        specimen: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips [`Error::Evaluation`] context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Evaluation { source, .. } => source.root(),
            other => other,
        }
    }
}
