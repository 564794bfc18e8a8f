use thiserror::Error;

use crate::wire::MsgType;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("expected {expected:?}, received {found:?}")]
    UnexpectedMessage { expected: MsgType, found: MsgType },
    #[error("authentication failed")]
    AuthFailure,
    #[error("key confirmation failed")]
    ConfirmationFailed,
    #[error("server key does not match the pinned fingerprint")]
    KeyMismatch,
    #[error("nonce {0} already used under this key")]
    NonceReuse(u64),
    #[error("out-of-order or replayed record (expected counter {expected}, got {found})")]
    Replay { expected: u64, found: u64 },
    #[error("peer reported an error: {0}")]
    Peer(String),
    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ChannelError> = std::result::Result<T, E>;
