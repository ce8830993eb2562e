use alloc::string::String;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("point {x} lies outside the knot interval [{a}, {b}]")]
    Domain { x: f64, a: f64, b: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("system too large for a dense operation: {size} > cap {cap}")]
    Size { size: usize, cap: usize },
    #[error("degree {0} is outside the tabulated range 1..=6")]
    UnsupportedDegree(usize),
    #[error("temporal factorization failed: {0}")]
    Factorization(String),
    #[error("singular spatial block at temporal index {k} (diagonal value {re:+.6e}{im:+.6e}i)")]
    SingularBlock { k: usize, re: f64, im: f64 },
    #[error("singular matrix (pivot {pivot:.3e} at row {row})")]
    Singular { row: usize, pivot: f64 },
    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
