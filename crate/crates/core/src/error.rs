use thiserror::Error;

pub type Result<T, E = AlmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AlmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("problem is sealed; no further changes allowed")]
    Sealed,

    #[error("problem must be sealed before solving")]
    NotSealed,

    #[error("expression references unknown variable {0}")]
    UnknownVariable(usize),

    #[error("second-order cone `{0}` has an empty vector part")]
    EmptyCone(String),

    #[error("backend `{backend}` does not support {feature}")]
    Unsupported {
        backend: &'static str,
        feature: &'static str,
    },

    #[error("cannot extract strategy: {0}")]
    Extraction(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl AlmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AlmError::InvalidInput(msg.into())
    }
}
