//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by path construction, kernel assembly, solvers and the
/// streaming protocol.
#[derive(Debug, Error)]
pub enum SigError {
    /// A precondition on user input was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A linear system was singular to working tolerance and no ridge term
    /// was supplied to regularize it.
    #[error("ill-conditioned system: {0}; consider setting a ridge weight > 0")]
    Conditioning(String),

    /// A numeric evaluation produced a non-finite value or diverged.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An online streaming step hit a singular diagonal block.
    #[error("degenerate streaming step at t = {t}: {msg}")]
    DegenerateStep { t: f64, msg: String },

    /// Parse failure with the offending line for CSV/config ingestion.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SigError>;

impl SigError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SigError::InvalidInput(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        SigError::Numeric(msg.into())
    }
}
