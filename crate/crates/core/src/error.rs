use thiserror::Error;

/// Errors raised anywhere in the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected} unresolved coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite state at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("trajectory {stream_id} blew up: {source}")]
    TrajectoryBlowUp {
        stream_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("closed-form reduced dynamics assume temperature 1, got {0}")]
    NonUnitTemperature(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {what} has length {got}, need at least {need}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        need: usize,
    },

    #[error("{0}")]
    Fit(String),

    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error("malformed input file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
