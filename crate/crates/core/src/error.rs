use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported constellation order {0}")]
    UnsupportedOrder(usize),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("noise level must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("residual variance must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("no extrinsic information for this symbol")]
    NoInformation,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
