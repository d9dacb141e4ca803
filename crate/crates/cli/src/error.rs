use std::path::Path;

use thiserror::Error;
use vqe_core::degrade::DegradeError;
use vqe_core::enhance::EnhanceError;
use vqe_core::eval::EvalError;
use vqe_core::media::MediaError;
use vqe_core::nn::NnError;
use vqe_study::StudyError;

/// Exit code 1 for bad input or configuration, 2 for failures while running.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

pub fn require_exists(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("missing input {}", path.display())))
    }
}

impl From<MediaError> for CliError {
    fn from(e: MediaError) -> Self {
        let runtime = match &e {
            MediaError::Io { .. } => true,
            MediaError::InFile { inner, .. } => matches!(**inner, MediaError::Io { .. }),
            _ => false,
        };
        if runtime {
            CliError::Runtime(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<DegradeError> for CliError {
    fn from(e: DegradeError) -> Self {
        match e {
            DegradeError::Media(m) => m.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<EnhanceError> for CliError {
    fn from(e: EnhanceError) -> Self {
        match e {
            EnhanceError::Media(m) => m.into(),
            EnhanceError::Config(_) | EnhanceError::Dimension(_) => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(_) => CliError::Runtime(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Io { .. } | StudyError::Log(_) => CliError::Runtime(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}
