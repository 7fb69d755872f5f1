//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: String },

    #[error("singular group covariance for label {label}, observed features {features:?}")]
    SingularGroupCovariance { label: usize, features: Vec<usize> },

    #[error("point set has {n} points; exhaustive search refused above {limit} (pass force to override)")]
    SizeGuard { n: usize, limit: usize },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
