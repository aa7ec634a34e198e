//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An IDX file did not start with the expected magic number.
    #[error("bad IDX magic: expected {expected:#010x}, got {found:#010x}")]
    IdxMagic { expected: u32, found: u32 },

    /// An IDX payload was shorter or longer than its header promised.
    #[error("IDX payload length mismatch: expected {expected} bytes, got {found}")]
    IdxLength { expected: usize, found: usize },

    /// A label byte was outside `[0, n_classes)`.
    #[error("label {value} at index {index} is out of range for {n_classes} classes")]
    LabelRange {
        index: usize,
        value: u8,
        n_classes: usize,
    },

    /// A caller violated an operation precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A config document failed to parse or violated a field constraint.
    #[error("config error: {0}")]
    Config(String),

    /// File I/O failed; the path is included for scriptability.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: config errors, I/O errors, and runtime
    /// errors are distinguishable by scripts.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } => 3,
            _ => 4,
        }
    }
}
