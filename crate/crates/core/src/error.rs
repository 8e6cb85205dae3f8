use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} sites, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("spin value {0} is not +1 or -1")]
    InvalidSpin(i8),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what}: {count} exceeds the enumeration cap of {cap}")]
    EnumerationCap {
        what: &'static str,
        count: usize,
        cap: usize,
    },

    #[error("vertex {0} is frozen")]
    FrozenVertex(usize),

    #[error("vertex {0} does not exist")]
    UnknownVertex(usize),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("no samples satisfied the conditioning event")]
    NoConditioningHits,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("labels were built in plane-only mode")]
    PlaneOnlyLabels,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
