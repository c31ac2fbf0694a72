use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(u32),

    #[error("unknown world {0:?}")]
    UnknownWorld(String),

    #[error("generation failed: {0}")]
    GenerationFailure(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("undefined input: {0}")]
    UndefinedInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("training aborted: {0}")]
    TrainingAbort(String),

    #[error("unsupported schema version {found} in {what} (expected {expected})")]
    Schema { what: &'static str, found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
