use std::io;

/// Errors produced by the audit library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dictionary exhausted: {0}")]
    DictionaryExhausted(String),

    #[error("not enough qualifying reports: need {needed}, found {found}")]
    NotEnoughReports { needed: usize, found: usize },

    #[error("position out of range: report {report}, sentence {sentence}, token {token}")]
    PositionOutOfRange {
        report: String,
        sentence: usize,
        token: usize,
    },

    #[error("non-finite loss at example {index}")]
    NonFiniteLoss { index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model container version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
