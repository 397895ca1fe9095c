use thiserror::Error;

/// Errors raised by the numerical kernel, the model layer and the simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is singular")]
    Singular,

    #[error("drift matrix is not Hurwitz (spectral abscissa {0:.6e})")]
    NotHurwitz(f64),

    #[error("condition (A1) violated: Q = Sigma Sigma^T is not strictly positive definite (lambda_min = {lambda_min:.3e}, lambda_max = {lambda_max:.3e})")]
    A1Violated { lambda_min: f64, lambda_max: f64 },

    #[error("condition (A2) violated: B has an eigenvalue with nonnegative real part (spectral abscissa {0:.6e})")]
    A2Violated(f64),

    #[error("non-finite state at step {step}; reduce dt")]
    StepUnstable { step: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
