use alloc::string::String;

/// Error type shared by every module of the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported parameter: {0}")]
    Unsupported(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("evaluation outside supported range: {0}")]
    Range(String),
    #[error("truncation bound {bound:e} not reached within {steps} steps")]
    Truncation { bound: f64, steps: usize },
    #[error("certificate inconclusive: {0}")]
    Inconclusive(String),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("conditioning failed: {0}")]
    Conditioning(String),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
