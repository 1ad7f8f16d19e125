use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the admissible domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A numeric evaluation left the supported range.
    #[error("range error: {0}")]
    Range(String),
    /// A quantity that should be finite grew without bound.
    #[error("divergence: {0}")]
    Divergent(String),
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("parse error: {0}")]
    Parse(String),
    /// Linear algebra failure (e.g. a factorization that is not positive definite).
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
