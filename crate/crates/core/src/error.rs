use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("parse error at line {line}: {message}")]
    LineParse { line: usize, message: String },
    #[error("coverage: {0}")]
    Coverage(String),
    #[error("no parse: {0}")]
    NoParse(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
