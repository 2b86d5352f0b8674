//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix or vector dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A NaN or infinity showed up where a finite value is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An iterative routine exhausted its iteration budget.
    #[error("failed to converge: {0}")]
    Convergence(String),

    /// A linear system is singular to working precision.
    #[error("singular system: {0}")]
    Singular(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// A metric is undefined for the given inputs (e.g. empty denominator).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
