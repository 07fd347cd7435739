use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index ({i}, {j}) out of range for {n}x{n} matrices")]
    IndexOutOfRange { i: usize, j: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("field mismatch: expected {expected}, found {found}")]
    FieldMismatch { expected: String, found: String },

    #[error("zero matrix where a nonzero matrix is required")]
    ZeroMatrix,

    #[error("matrix is not unitary within tolerance (defect {0:e})")]
    NotUnitary(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is singular (relative smallest singular value {0:e})")]
    SingularOperator(f64),

    #[error("missing image for basis element {0}")]
    MissingBasisImage(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("invalid tolerance profile: {0}")]
    InvalidTolerance(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
