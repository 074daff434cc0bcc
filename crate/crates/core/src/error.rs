use thiserror::Error;

#[derive(Debug, Error)]
pub enum SihtError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("batch must contain at least one sample")]
    EmptyBatch,

    #[error("enumeration of {count} batches exceeds the cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error(
        "objective increased at iteration {iteration}: {previous:e} -> {current:e} \
         (smoothness modulus is likely underestimated)"
    )]
    MonotonicityViolation {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, SihtError>;

pub(crate) fn invalid(msg: impl Into<String>) -> SihtError {
    SihtError::InvalidArgument(msg.into())
}
