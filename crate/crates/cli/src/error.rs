use std::process::ExitCode;

use redkit::onnx_bridge::OnnxError;

pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_UNSUPPORTED: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or unreadable/malformed input files.
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Unsupported(_) => EXIT_UNSUPPORTED,
            CliError::Internal(_) => EXIT_INTERNAL,
        })
    }

    pub fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<OnnxError> for CliError {
    fn from(e: OnnxError) -> Self {
        match e {
            OnnxError::Unsupported(_) | OnnxError::NotSequential(_) => CliError::Unsupported(e.to_string()),
            OnnxError::Malformed(_) | OnnxError::Shape(_) => CliError::Usage(e.to_string()),
            OnnxError::Net(_) => CliError::Internal(e.to_string()),
        }
    }
}
