use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),
    #[error("dimension {0} is not a prime power; use the Gell-Mann observable set instead")]
    UnsupportedDimension(usize),
    #[error("measurement basis is singular (condition number {condition:.3e})")]
    SingularBasis { condition: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("entanglement fraction is undefined for a reference state with zero entanglement")]
    UndefinedFraction,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
