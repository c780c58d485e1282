use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),

    #[error("incompatible photon modes: {0}")]
    IncompatibleModes(String),

    #[error("quadrature accuracy check failed: {0}")]
    Accuracy(String),

    #[error("conditional distribution undefined: first outcome {0} has zero probability")]
    UndefinedConditional(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("circuit events out of order: {now} s after {last} s")]
    Sequencing { last: f64, now: f64 },

    #[error("gate fit failed: {0}")]
    FitFailure(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("visibility undefined: {0}")]
    UndefinedVisibility(String),

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
