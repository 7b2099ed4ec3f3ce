use thiserror::Error;

/// Errors produced by model estimation, file parsing, and the classifier.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no training data")]
    NoTrainingData,

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("context n-gram not prunable: {0}")]
    NotPrunable(String),

    #[error("template references unknown tag <{0}>")]
    UnknownSlotTag(String),

    #[error("unreachable input: no complete decoding path")]
    UnreachableInput,

    #[error("degenerate labels: training data contains a single class")]
    DegenerateLabels,

    #[error("feature schema mismatch: expected {expected}, got {got}")]
    SchemaMismatch { expected: String, got: String },

    #[error("no positive labels in scored data")]
    NoPositives,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}
