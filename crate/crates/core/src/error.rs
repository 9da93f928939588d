use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Haar index (level {level}, shift {shift}): shift must lie in 0..2^(level-1)")]
    InvalidIndex { level: u32, shift: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::NoConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain_err(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
