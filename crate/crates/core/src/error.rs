//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label {label} is not in {{-1, +1}} (required by the {loss} loss)")]
    InvalidLabel { loss: &'static str, label: f64 },

    /// A dual variable fell outside the interval on which the conjugate of
    /// the loss is defined.
    #[error("beta = {beta} outside the dual domain [{lo}, {hi}]")]
    OutOfDomain { beta: f64, lo: f64, hi: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An iterate left the finite range.  Runs record this as an outcome
    /// rather than treating it as a bug; see the learner documentation.
    #[error("iterate diverged at step {step}")]
    Diverged { step: u64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
