use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum HypoError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid entry at ({row}, {col}): {value}")]
    InvalidEntry { row: usize, col: usize, value: String },

    #[error("range error: {0}")]
    Range(String),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{bound:e}")]
    NotPsd { eigenvalue: f64, bound: f64 },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no decay: {0}")]
    NoDecay(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HypoError {
    /// True for failures caused by the input rather than by the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HypoError::Dimension(_)
                | HypoError::InvalidEntry { .. }
                | HypoError::NotPsd { .. }
                | HypoError::ContractViolation(_)
                | HypoError::Precondition(_)
                | HypoError::Parameter(_)
                | HypoError::Io(_)
                | HypoError::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, HypoError>;
