use std::path::PathBuf;

use thiserror::Error;

/// Unified error type for the crate.
///
/// The CLI maps these onto process exit codes: parameter and invariant
/// violations exit with 4, everything else (I/O, malformed or unsupported
/// data) with 3. Usage errors are handled by the argument parser and exit
/// with 2 before any of these are constructed.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input bytes do not look like the named format at all.
    #[error("invalid {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    /// Recognized the format but this variant is out of scope.
    #[error("unsupported {format} input: {reason}")]
    Unsupported {
        format: &'static str,
        reason: String,
    },

    #[error("unsupported {format} version {found}, expected {expected}")]
    UnsupportedVersion {
        format: &'static str,
        found: u32,
        expected: u32,
    },

    /// Header promised more bytes than the input contains.
    #[error("truncated {format} data: expected {expected} bytes, found {actual}")]
    Truncated {
        format: &'static str,
        expected: u64,
        actual: u64,
    },

    /// Structurally valid container with required fields absent.
    #[error("{format} schema error: missing {missing:?}")]
    MissingProperties {
        format: &'static str,
        missing: Vec<String>,
    },

    /// Payload decoding failed (bad checksum, impossible lengths, ...).
    #[error("corrupt {format} payload: {reason}")]
    Corrupt {
        format: &'static str,
        reason: String,
    },

    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::CapacityExceeded(_) => 4,
            _ => 3,
        }
    }
}
