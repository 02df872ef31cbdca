use thiserror::Error;

/// Errors raised by the estimation, diagonalization and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MticaError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("data matrix is empty")]
    EmptyData,

    #[error("data contains a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// Every raw MT-weight underflowed; the test-point lies far outside the data support.
    #[error("degenerate weights: log mean raw weight {log_mean_weight:.3} is below the representable floor")]
    DegenerateWeights { log_mean_weight: f64 },

    #[error("MT-covariance has eigenvalue {min_eigenvalue:e} below -1e-10")]
    SingularMoments { min_eigenvalue: f64 },

    #[error("sample covariance is singular (eigenvalue ratio {ratio:e})")]
    SingularCovariance { ratio: f64 },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("matrix stack is not symmetric: entry deviation {deviation:e} in matrix {index}")]
    NotSymmetric { index: usize, deviation: f64 },

    #[error("only {survived} usable MT-covariance matrices remain, need {needed}")]
    InsufficientTestPoints { survived: usize, needed: usize },

    #[error("outlier count {count} exceeds sample count {n}")]
    CountExceedsN { count: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, MticaError>;
