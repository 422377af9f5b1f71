use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("negative eigenvalue {value:e} below tolerance")]
    NegativeEigenvalue { value: f64 },

    #[error("{routine} failed to converge after {iterations} iterations")]
    Convergence { routine: &'static str, iterations: usize },

    #[error("insufficient samples: n = {n} but the Kronecker MLE needs n > {p1}/{p2} + {p2}/{p1}")]
    InsufficientSamples { n: usize, p1: usize, p2: usize },

    #[error("flip-flop iterate lost positive definiteness at sweep {sweep}")]
    SingularIterate { sweep: usize },

    #[error("sample covariance is singular (n = {n}, p = {p})")]
    SingularSample { n: usize, p: usize },

    #[error("incompatible parameters: {0}")]
    IncompatibleParameters(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("calibration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("statistic {0} is unavailable for this input")]
    Unavailable(String),

    #[error("replicate {index} failed: {source}")]
    ReplicateFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed Tracy-Widom table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
