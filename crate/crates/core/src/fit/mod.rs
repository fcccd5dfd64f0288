//! Joint least-squares extraction of cavity and mechanical parameters from
//! `|S21|` data.
//!
//! Every dataset depends on the seven parameters of [`ParamName`]. Each one
//! is fixed, free for that dataset alone, or tied to a shared group so that
//! several datasets (for instance all pump settings at one temperature) see
//! the same value.

mod lineshape;
pub mod lm;
mod params;
mod problem;

use thiserror::Error;

pub use lineshape::{extract_linewidth, init_heuristics, noise_estimate, InitialGuess, MIN_SAMPLES_PER_WIDTH};
pub use params::{BindingMode, ParamBinding, ParamName, SharedBinding};
pub use problem::{model_magnitudes, DataPoint, FitDataset, FitProblem, Scope, PENALTY_RESIDUAL};

use lm::{minimize, LmSettings};
use problem::Layout;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid fit problem: {0}")]
    InvalidProblem(String),
    #[error("{points} data points cannot determine {parameters} parameters")]
    InsufficientData { points: usize, parameters: usize },
    #[error("fit did not converge after {} iterations (rms residual {:e})", .0.iterations, .0.rms_residual)]
    NotConverged(Box<FitResult>),
    #[error("no optomechanical feature found")]
    FeatureNotFound,
    #[error("feature spans {samples} samples, at least {required} needed")]
    UnderResolved { samples: usize, required: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedParam {
    pub name: ParamName,
    pub scope: Scope,
    pub value: f64,
    /// One standard deviation from the linearized covariance at the optimum,
    /// scaled by the reduced residual variance. NaN when the normal matrix
    /// is singular.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted parameters in problem order: shared groups, then per-dataset
    /// free parameters.
    pub values: Vec<FittedParam>,
    /// Full parameter set of every dataset at the optimum, indexed by
    /// [`ParamName::index`].
    pub dataset_values: Vec<[f64; 7]>,
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Sum of squared residuals after each accepted step.
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, name: ParamName, scope: &Scope) -> Option<&FittedParam> {
        self.values.iter().find(|p| p.name == name && &p.scope == scope)
    }

    /// Value of `name` as seen by dataset `d`.
    pub fn dataset_value(&self, d: usize, name: ParamName) -> f64 {
        self.dataset_values[d][name.index()]
    }
}

/// Fits `problem` with the default optimizer settings.
///
/// Returns [`FitError::NotConverged`] carrying the best point reached when
/// the iteration cap is hit first.
pub fn fit(problem: &FitProblem) -> Result<FitResult, FitError> {
    fit_with(problem, &LmSettings::default())
}

pub fn fit_with(problem: &FitProblem, settings: &LmSettings) -> Result<FitResult, FitError> {
    let layout = Layout::new(problem)?;
    let n = layout.slots.len();
    let m = problem.total_points();
    if m < n || n == 0 {
        return Err(FitError::InsufficientData {
            points: m,
            parameters: n,
        });
    }
    let outcome = minimize(
        |u: &[f64]| problem.residuals_internal(&layout, u),
        &layout.initial(),
        1.0,
        2.0,
        settings,
    );

    let cost = outcome.cost_history.last().copied().unwrap_or(0.0);
    let dof = (m - n).max(1) as f64;
    let jtj = outcome.jacobian.tr_mul(&outcome.jacobian);
    let covariance = jtj.try_inverse().map(|inv| inv * (cost / dof));
    let values = layout
        .slots
        .iter()
        .enumerate()
        .map(|(j, slot)| {
            let u = outcome.x[j];
            let uncertainty = covariance
                .as_ref()
                .map(|c| c[(j, j)].max(0.0).sqrt() * slot.coord.derivative(u).abs())
                .unwrap_or(f64::NAN);
            FittedParam {
                name: slot.name,
                scope: slot.scope.clone(),
                value: slot.coord.to_physical(u),
                uncertainty,
            }
        })
        .collect();
    let result = FitResult {
        values,
        dataset_values: (0..problem.datasets.len())
            .map(|d| layout.values(d, &outcome.x))
            .collect(),
        rms_residual: (cost / m as f64).sqrt(),
        residuals: outcome.residuals,
        iterations: outcome.iterations,
        converged: outcome.converged,
        cost_history: outcome.cost_history,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(FitError::NotConverged(Box::new(result)))
    }
}

#[cfg(test)]
mod tests;
