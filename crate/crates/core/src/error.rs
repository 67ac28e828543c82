use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Q-matrix: {0}")]
    InvalidQMatrix(String),

    #[error("attribute count {0} exceeds the supported maximum of {max}", max = crate::qspace::MAX_ATTRIBUTES)]
    TooManyAttributes(usize),

    #[error("item count {0} exceeds the T-matrix maximum of {max}", max = crate::tmatrix::MAX_TMATRIX_ITEMS)]
    TooManyItems(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("every class likelihood underflows for response pattern {0}")]
    Underflow(String),

    #[error("quadrature underflow: probability of class {0} is below 1e-300")]
    QuadratureUnderflow(String),

    #[error("marginal posterior under a saturated prior depends on the within-class allocation; supply one or use mastery bounds")]
    AllocationRequired,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
