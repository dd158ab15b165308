use std::fmt;

use veil_core::backends::{BackendError, ConfigError};
use veil_core::obfuscate::ObfuscationError;
use veil_core::pipeline::PipelineError;
use veil_core::raster::RasterError;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_BACKEND: u8 = 3;
pub const EXIT_PARSE: u8 = 4;
pub const EXIT_EVAL_CASES: u8 = 5;

/// A failed command: the process exit code and a one-line message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(EXIT_VALIDATION, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        Self::new(EXIT_BACKEND, format!("{}: {e}", e.code()))
    }
}

impl From<ObfuscationError> for CliError {
    fn from(e: ObfuscationError) -> Self {
        match e {
            ObfuscationError::Backend(b) => b.into(),
            other => Self::validation(format!("{}: {other}", other.code())),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::ParseAfterRetry { .. } => EXIT_PARSE,
            PipelineError::Backend(_) | PipelineError::Obfuscation(ObfuscationError::Backend(_)) => EXIT_BACKEND,
            PipelineError::Integrity(_) => EXIT_FAILURE,
            _ => EXIT_VALIDATION,
        };
        Self::new(code, format!("{}: {e}", e.code()))
    }
}
