use std::io;
use std::path::Path;

use omit_core::fit::FitError;
use omit_core::{ModelError, SweepError};
use thiserror::Error;

/// Every failure of a command, with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("singular model at {0}")]
    Singular(String),
    #[error("fit did not converge within {iterations} iterations (rms residual {rms:e})")]
    NotConverged { iterations: usize, rms: f64 },
    #[error("insufficient data: {points} points for {parameters} fitted parameters")]
    InsufficientData { points: usize, parameters: usize },
    #[error("linewidth: {0}")]
    Feature(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } => 2,
            CliError::Singular(_) => 3,
            CliError::NotConverged { .. } => 4,
            CliError::InsufficientData { .. } => 5,
            CliError::Feature(_) => 6,
            CliError::Write { .. } => 7,
        }
    }

    pub(crate) fn write(path: &Path, source: io::Error) -> Self {
        CliError::Write {
            path: path.display().to_string(),
            source,
        }
    }

    /// Sweep failures, with `context` naming the offending condition.
    pub(crate) fn sweep(context: &str, e: SweepError) -> Self {
        match e {
            SweepError::Singular { .. } => CliError::Singular(format!("{context}: {e}")),
            SweepError::Model(ModelError::SingularDenominator { .. }) => CliError::Singular(format!("{context}: {e}")),
            other => CliError::Config(format!("{context}: {other}")),
        }
    }

    pub(crate) fn model(context: &str, e: ModelError) -> Self {
        match e {
            ModelError::SingularDenominator { .. } => CliError::Singular(format!("{context}: {e}")),
            other => CliError::Config(format!("{context}: {other}")),
        }
    }

    pub(crate) fn fit(e: FitError) -> Self {
        match e {
            FitError::InsufficientData { points, parameters } => CliError::InsufficientData { points, parameters },
            FitError::NotConverged(best) => CliError::NotConverged {
                iterations: best.iterations,
                rms: best.rms_residual,
            },
            FitError::FeatureNotFound | FitError::UnderResolved { .. } => CliError::Feature(e.to_string()),
            FitError::InvalidProblem(msg) => CliError::Config(msg),
        }
    }
}
