use cordes_core::LabError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lab(#[from] LabError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("verification failed: {0}")]
    Verify(String),
}

/// Machine-readable failure record.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    /// 2 for violated hypotheses and bad input, 3 for numerical failures,
    /// 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lab(e) if e.is_hypothesis_violation() => 2,
            CliError::Lab(_) => 3,
            CliError::Config(_) => 2,
            CliError::Verify(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn report(&self) -> ErrorReport {
        let (error, kind) = match self {
            CliError::Lab(e) if e.is_hypothesis_violation() => ("hypothesis_violation", e.kind()),
            CliError::Lab(e) => ("numerical_failure", e.kind()),
            CliError::Config(_) => ("hypothesis_violation", "config"),
            CliError::Verify(_) => ("numerical_failure", "verify"),
            CliError::Io(_) => ("io", "io"),
        };
        ErrorReport {
            error,
            kind,
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}
