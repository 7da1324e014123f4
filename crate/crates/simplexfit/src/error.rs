//! Exit-status classes and conversions from library errors.

use simplex_core::data::DataError;
use simplex_core::diagnostics::DiagnosticsError;
use simplex_core::estimate::EstimateError;
use simplex_core::model::ModelError;
use simplex_core::study::StudyError;
use thiserror::Error;

/// Failure classes, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Numerical(_) => 5,
        }
    }

    pub fn io(context: &str, e: std::io::Error) -> Self {
        CliError::Numerical(format!("{context}: {e}"))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let msg = e.to_string();
        match e {
            ModelError::UnknownCovariate(_) => CliError::Data(msg),
            ModelError::InvalidState { .. } | ModelError::Dimension { .. } => CliError::Numerical(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        let msg = e.to_string();
        match e {
            EstimateError::Model(m) => m.into(),
            EstimateError::Options(_) => CliError::Config(msg),
            EstimateError::TooFewObservations { .. } => CliError::Data(msg),
            EstimateError::NotConverged => CliError::NotConverged(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        let msg = e.to_string();
        match e {
            DiagnosticsError::Estimate(x) => x.into(),
            DiagnosticsError::Model(x) => x.into(),
            DiagnosticsError::NotConverged => CliError::NotConverged(msg),
            DiagnosticsError::UnknownCovariate { .. } | DiagnosticsError::BadCase(_) | DiagnosticsError::Invalid(_) => {
                CliError::Config(msg)
            }
            DiagnosticsError::ZeroVariance(_) => CliError::Data(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        let msg = e.to_string();
        match e {
            StudyError::Model(m) => m.into(),
            StudyError::Invalid(_) => CliError::Config(msg),
            StudyError::TooManyFailures { .. } => CliError::Numerical(msg),
        }
    }
}
