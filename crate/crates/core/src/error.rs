use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("grid size mismatch: expected {expected} samples, got {actual}")]
    GridMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("time ordering violated: {earlier} is not before {later}")]
    TimeOrder { earlier: f64, later: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate box: {0}")]
    DegenerateBox(String),

    #[error("resolution guard violated: {0}")]
    Resolution(String),

    #[error("environment does not cover the padded trajectory box")]
    EnvironmentCoverage,

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("memory guard: {cells} cells exceeds limit {limit}")]
    TooManyCells { cells: u128, limit: u128 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
