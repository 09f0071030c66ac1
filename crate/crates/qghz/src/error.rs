// SPDX-License-Identifier: Apache-2.0
//! Error type of the command-line layer and its exit codes.

use qghz_core::fock_oracle::OracleError;
use qghz_core::ghz_pipeline::PipelineError;
use qghz_core::keyrate::KeyRateError;
use qghz_core::loss_analytics::LossError;
use qghz_core::model::ValidationErrors;
use qghz_core::spectral::SpectralError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, flag or figure name.
    #[error("validation error: {0}")]
    Validation(String),
    /// A cross-check exceeded its tolerance.
    #[error("acceptance deviation: {0}")]
    Deviation(String),
    /// A numerical routine failed.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Deviation(_) => 3,
            Self::Numeric(_) => 4,
            Self::Io { .. } => 1,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }
}

impl From<ValidationErrors> for CliError {
    fn from(e: ValidationErrors) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::OutOfRange { .. } | LossError::SingularP | LossError::NoEmission(_) => Self::Validation(e.to_string()),
            LossError::Model(_) => Self::Numeric(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Loss(l) => l.into(),
            PipelineError::OutOfRange { .. } | PipelineError::NoPhotons | PipelineError::Invalid(_) => {
                Self::Validation(e.to_string())
            }
            PipelineError::NoAcceptedTrajectories { .. } | PipelineError::ZeroPass => Self::Numeric(e.to_string()),
        }
    }
}

impl From<KeyRateError> for CliError {
    fn from(e: KeyRateError) -> Self {
        match e {
            KeyRateError::Pipeline(p) => p.into(),
            KeyRateError::Loss(l) => l.into(),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::NotTimeResolved
            | SpectralError::BadMode { .. }
            | SpectralError::TooManyEmitters(_)
            | SpectralError::Length { .. } => Self::Validation(e.to_string()),
            _ => Self::Numeric(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Invalid(_) | OracleError::TooLarge { .. } | OracleError::BadMode { .. } => {
                Self::Validation(e.to_string())
            }
            OracleError::NegligibleBranch(_) => Self::Numeric(e.to_string()),
        }
    }
}
