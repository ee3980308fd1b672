use ctp_core::CtpError;
use thiserror::Error;

/// Failure of a scenario run, split by exit code.
#[derive(Debug, Error)]
pub enum RunError {
    /// Malformed request: exit code 1.
    #[error("{0}")]
    Input(String),
    /// Well-formed request whose computation failed: exit code 2.
    #[error("{0}")]
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Input(_) => 1,
            RunError::Numerical(_) => 2,
        }
    }

    /// Machine-readable diagnostic `code: message`.
    pub fn diagnostic(&self) -> String {
        match self {
            RunError::Input(msg) => format!("input: {msg}"),
            RunError::Numerical(msg) => format!("numerical: {msg}"),
        }
    }
}

impl From<CtpError> for RunError {
    fn from(e: CtpError) -> Self {
        if e.is_input_error() {
            RunError::Input(e.to_string())
        } else {
            RunError::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Input(format!("cannot write output: {e}"))
    }
}
