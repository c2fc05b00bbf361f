//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not in the interior of the domain")]
    NotInterior,

    #[error("point is not on the boundary (residual {0:.3e})")]
    NotOnBoundary(f64),

    #[error("direction vector is zero")]
    ZeroDirection,

    #[error("subspace dimension k={k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("operation requires a bounded domain")]
    Unbounded,

    #[error("operation not supported for this body: {0}")]
    Unsupported(String),

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate construction: {0}")]
    Degenerate(String),

    #[error("internal consistency check failed: {0}")]
    InternalCheck(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
