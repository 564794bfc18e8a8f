use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Channel(#[from] qpass_channel::ChannelError),
    #[error(transparent)]
    Core(#[from] qpass_core::Error),
    #[error("{}:{line}:{column}: {message}", path.display())]
    CorruptStore {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("user `{0}` is already enrolled")]
    Duplicate(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid or reused token: {0}")]
    Token(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NetError> = std::result::Result<T, E>;
