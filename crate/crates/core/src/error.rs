use thiserror::Error;

/// Errors raised by the numerics in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NonHermitianInput { defect: f64 },

    #[error("eigenvalue {value:.3e} is below the negative cutoff {cutoff:.3e}")]
    NegativeEigenvalue { value: f64, cutoff: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("sigma is singular and support restriction is disabled")]
    SingularSigma,

    #[error("instance is not strictly positive (min eigenvalue {min_eigenvalue:.3e})")]
    NotStrictlyPositive { min_eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed document: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
