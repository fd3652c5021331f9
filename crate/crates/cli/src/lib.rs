//! Library surface of the command-line driver: configuration schema,
//! file formats, sweep runner and the error-to-exit-code policy.

pub mod config;
pub mod io;
pub mod sweep;

use onnmesh::CoreError;

/// Error carrying the process exit code policy:
/// 1 config, 2 numeric-input rejection, 3 transferability violation,
/// 4 runtime failure.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl CliError {
    pub fn config(message: String) -> Self {
        Self { code: 1, message }
    }
    pub fn numeric(message: String) -> Self {
        Self { code: 2, message }
    }
    pub fn transfer(message: String) -> Self {
        Self { code: 3, message }
    }
    pub fn runtime(message: String) -> Self {
        Self { code: 4, message }
    }
    pub fn from_core(e: CoreError) -> Self {
        match e {
            CoreError::NotUnitary { .. } => Self::numeric(e.to_string()),
            CoreError::NotTransferable { .. } => Self::transfer(e.to_string()),
            CoreError::Io { .. } | CoreError::Parse { .. } => Self::config(e.to_string()),
            other => Self::runtime(other.to_string()),
        }
    }
}
