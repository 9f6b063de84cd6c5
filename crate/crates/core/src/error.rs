use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid normalization stats: {0}")]
    InvalidStats(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: {message}")]
    Row { line: usize, message: String },

    #[error("duplicate id {0}")]
    DuplicateId(u64),

    #[error("unknown id {0}")]
    UnknownId(u64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index not built: {0}")]
    IndexNotBuilt(String),

    #[error("corrupt index file: {0}")]
    Corrupt(String),

    #[error("worker {worker} failed: {message}")]
    Worker { worker: usize, message: String },

    #[error("protocol error ({code}): {message}")]
    Protocol { code: String, message: String },

    #[error("training failed: {0}")]
    Training(String),

    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error("{0}")]
    Usage(String),

    #[error("bind error: {0}")]
    Bind(String),

    #[error(transparent)]
    Sql(#[from] crate::sql::ParseError),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Bincode(#[from] bincode::Error),
}
