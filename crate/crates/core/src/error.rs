use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unrecognised name or token: {0}")]
    Parse(String),

    #[error("{what} out of range: {value} (expected < {bound})")]
    Range {
        what: &'static str,
        value: i64,
        bound: i64,
    },

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("step called on a finished episode")]
    StepAfterDone,

    #[error("episode is still running")]
    CalledBeforeDone,

    #[error("oracle total must be positive, got {0}")]
    NonPositiveOracle(f64),

    #[error("suite has no hard tasks")]
    DegenerateSuite,

    #[error("no records to aggregate")]
    EmptyInput,

    #[error("trace does not end a finished episode")]
    IncompleteTrace,

    #[error("task {task} failed validation: {issues}")]
    InvalidTask { task: u32, issues: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn schema(line: usize, message: impl Into<String>) -> Self {
        Error::Schema {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
