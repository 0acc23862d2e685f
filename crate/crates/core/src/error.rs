use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate vector: norm {norm:e} is below the normalization floor")]
    DegenerateVector { norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("column {index} is not unit norm (norm {norm})")]
    NotUnitNorm { index: usize, norm: f64 },
    #[error("cost matrix has more rows ({rows}) than columns ({cols}); swap the operands")]
    MoreRowsThanColumns { rows: usize, cols: usize },
    #[error("non-finite cost at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("instance {rows}x{cols} exceeds the enumeration bound of {bound}")]
    EnumerationBound { rows: usize, cols: usize, bound: usize },
    #[error("invalid association matrix: {0}")]
    InvalidAssociation(String),
    #[error("frame has no crops")]
    EmptyFrame,
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("no eligible frame pair within the time bound")]
    NoEligiblePair,
    #[error("non-finite gradient at parameter {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("activation cache does not match the encoder: {0}")]
    CacheMismatch(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
