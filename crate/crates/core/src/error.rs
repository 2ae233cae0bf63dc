use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A real value does not fit the integer field of the fixed-point encoding.
    #[error("value {value} is outside the representable range (|x| < 2^{int_bits})")]
    Range { value: f64, int_bits: u32 },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Inputs to a protocol disagree in shape; the protocol aborts before any traffic.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("correlated randomness exhausted for {tag}")]
    RandomnessUnderflow { tag: &'static str },

    #[error("correlated randomness mismatch: expected {expected}, found {found}")]
    RandomnessMismatch { expected: String, found: String },

    #[error("malformed frame: {0}")]
    Frame(String),

    #[error("session parameters disagree: {0}")]
    Handshake(String),

    #[error("transport failure: {0}")]
    Transport(#[from] io::Error),

    #[error("peer disconnected")]
    Disconnected,

    #[error("format error: {0}")]
    Format(String),

    #[error("row {row}, column {column}: {message}")]
    Ingest {
        row: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for failures of the network layer (as opposed to protocol or format errors).
    pub fn is_transport(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::Disconnected | Error::Frame(_))
    }
}
