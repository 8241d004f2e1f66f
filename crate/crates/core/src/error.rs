use thiserror::Error;

/// Errors produced by the weak Galerkin library.
#[derive(Debug, Error)]
pub enum WgError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric positive definite ({0})")]
    NotPositiveDefinite(String),

    #[error("eigensolver did not converge after {iterations} iterations (max residual {max_residual:.3e})")]
    NoConvergence {
        iterations: usize,
        max_residual: f64,
    },

    #[error("problem too large for the dense oracle: {dofs} dofs exceeds {limit}")]
    TooLarge { dofs: usize, limit: usize },

    #[error("eigenvalue cluster mismatch: {0}")]
    ClusterMismatch(String),

    #[error("nonpositive error value {value} at level {level}")]
    NonPositiveError { level: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, WgError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> WgError {
    WgError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
