//! Error type shared across the library surface.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SjError {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("{what}: residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    InvariantViolation { what: String, residual: f64, tol: f64 },

    #[error("singular matrix in {0}")]
    Singular(String),

    #[error("polynomial {0} is not unitary-invariant; the operator correspondence is only defined on invariants")]
    NotInvariant(String),

    #[error("invalid index for {family}: {detail}")]
    InvalidIndex { family: String, detail: String },

    #[error("unknown name: {0}")]
    UnknownName(String),
}

pub type SjResult<T> = Result<T, SjError>;

impl SjError {
    pub fn invariant(what: &str, residual: f64, tol: f64) -> SjError {
        SjError::InvariantViolation { what: what.to_string(), residual, tol }
    }
}
