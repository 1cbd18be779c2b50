use fsr_core::decode::DecodeError;
use fsr_core::lm::SourceError;
use thiserror::Error;

/// Exit status for I/O, usage and schema failures.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status when the remote adapter cannot be reached.
pub const EXIT_TRANSPORT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Transport(String),
    #[error("{0}")]
    Decode(String),
}

impl CliError {
    pub fn io(path: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Transport(_) => EXIT_TRANSPORT,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::Source(
                s @ (SourceError::Transport { .. } | SourceError::Malformed { .. }),
            ) => CliError::Transport(s.to_string()),
            other => CliError::Decode(other.to_string()),
        }
    }
}
