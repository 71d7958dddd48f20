use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (entry ({row}, {col}))")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid lambda sequence: {0}")]
    InvalidLambda(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("all {0} replications failed; first error: {1}")]
    AllReplicationsFailed(usize, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input (configuration, data files,
    /// parameters) as opposed to runtime or numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::DimensionMismatch { .. }
                | Error::NotSymmetric { .. }
                | Error::InvalidLambda(_)
                | Error::Config(_)
                | Error::Parse(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
