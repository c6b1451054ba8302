//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible array shapes for an operation.
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// Malformed input data (file parsing, ragged rows, non-numeric fields).
    #[error("parse error at row {row}: {detail}")]
    Parse { row: usize, detail: String },

    /// Invalid configuration value or unknown key.
    #[error("config error: {0}")]
    Config(String),

    /// Numerical failure: non-finite values, SVD non-convergence, degenerate input.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dimension(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
