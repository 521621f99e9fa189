use std::process::ExitCode;

use srgbm_core::calibration::CalibrationError;
use srgbm_core::ensemble::EnsembleError;
use srgbm_core::io::DataError;
use srgbm_core::measures::MeasureError;
use srgbm_core::model::ModelError;
use thiserror::Error;

/// Failure categories, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        })
    }
}

/// Maps a parameter name of the model to its command-line flag.
pub fn flag_of(name: &str) -> &str {
    match name {
        "sigma" => "sigma2",
        other => other,
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match &e {
            ModelError::InvalidParameter { name, .. } => CliError::Config(format!("--{}: {e}", flag_of(name))),
            ModelError::NoStationaryLaw(name) => {
                CliError::Config(format!("--{}: {e}", flag_of(name)))
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EnsembleError> for CliError {
    fn from(e: EnsembleError) -> Self {
        match e {
            EnsembleError::Model(m) => m.into(),
            EnsembleError::InvalidStep { .. } => CliError::Config(format!("--dt: {e}")),
            EnsembleError::TooFewSlots { .. } => CliError::Config(format!("--n: {e}")),
            EnsembleError::InvalidHorizon(_) => CliError::Config(format!("--horizon: {e}")),
            EnsembleError::MisalignedSnapshot { .. }
            | EnsembleError::SnapshotOutOfRange { .. }
            | EnsembleError::SnapshotsNotIncreasing => CliError::Config(format!("--every: {e}")),
            EnsembleError::NonPositiveIncome { .. } | EnsembleError::Panel(_) => CliError::Data(e.to_string()),
            EnsembleError::ForeignBlock => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Ensemble(inner) => inner.into(),
            MeasureError::Model(inner) => inner.into(),
            MeasureError::BadFraction(_) | MeasureError::TooSmallForFraction { .. } => {
                CliError::Config(format!("--p-list: {e}"))
            }
            MeasureError::BadLag(_) | MeasureError::NoPairs(_) => CliError::Config(format!("--delta: {e}")),
            MeasureError::BadGrid(_) => CliError::Config(format!("--r-grid: {e}")),
            MeasureError::TooFew { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Ensemble(inner) => inner.into(),
            CalibrationError::Model(inner) => inner.into(),
            CalibrationError::Measure(inner) => inner.into(),
            CalibrationError::InvalidInput(_) | CalibrationError::ConstantObserved => CliError::Data(e.to_string()),
            CalibrationError::OptimizerFailure { .. } | CalibrationError::TooManyFailures { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Ensemble(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}
