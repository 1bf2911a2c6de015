use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("invalid utf-8 on line {line}")]
    InvalidUtf8 { line: usize },

    #[error("template error: {0}")]
    Template(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("overlap detected: {0}")]
    Overlap(String),

    #[error("unknown relation: {0}")]
    UnknownRelation(String),

    #[error("unsupported variant for backend: {0}")]
    UnsupportedVariant(String),

    #[error("no demonstration pool available for few-shot prediction")]
    MissingDemonstrations,

    #[error("decoder output {index}: {msg}")]
    DecoderParse { index: usize, msg: String },

    #[error("missing prediction for query {0}")]
    MissingPrediction(String),

    #[error("misaligned query sets: {0}")]
    Misaligned(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("remote returned status {0}")]
    RemoteStatus(u16),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
