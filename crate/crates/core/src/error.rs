use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("target is constant, R² is undefined")]
    ConstantTarget,

    #[error("singular Gram matrix: basis does not have full column rank")]
    SingularGram,

    #[error("ReLU network training diverged at step {0}")]
    Diverged(usize),

    #[error("data error: {0}")]
    Data(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Whether the failure stems from numerics rather than from inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::Factorization(_) | Error::Diverged(_) | Error::SingularGram
        )
    }
}
