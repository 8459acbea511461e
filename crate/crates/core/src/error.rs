use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` has arity {expected}, got {got} arguments")]
    Arity {
        relation: String,
        expected: usize,
        got: usize,
    },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("root `{0}` is not a value of the database")]
    MissingRoot(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dim { expected: usize, got: usize },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("operation requires floating point: {0}")]
    Inexact(String),
    #[error("no gradient: {0}")]
    NoGradient(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
