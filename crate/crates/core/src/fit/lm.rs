//! Damped least squares (Levenberg–Marquardt) on box-bounded coordinates.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Optimizer settings. The defaults are the values the fit engine uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub initial_damping: f64,
    /// Damping is multiplied by this on a rejected step and divided on an accepted one.
    pub damping_factor: f64,
    pub max_iterations: usize,
    /// Stop when the relative decrease of the residual norm falls below this.
    pub residual_tolerance: f64,
    /// Stop when the relative parameter step falls below this.
    pub step_tolerance: f64,
    /// Central-difference step relative to the coordinate value.
    pub relative_step: f64,
    pub absolute_step: f64,
    pub max_damping: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            initial_damping: 1e-3,
            damping_factor: 10.0,
            max_iterations: 200,
            residual_tolerance: 1e-10,
            step_tolerance: 1e-10,
            relative_step: 1e-6,
            absolute_step: 1e-12,
            max_damping: 1e16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `‖r‖²` after every accepted step, starting with the initial point.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Jacobian at `x`.
    pub jacobian: DMatrix<f64>,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn norm(v: &[f64]) -> f64 {
    sum_sq(v).sqrt()
}

/// Central-difference Jacobian, one column per coordinate, computed in parallel.
pub fn numeric_jacobian<F>(f: &F, x: &[f64], m: usize, settings: &LmSettings) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let columns: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let h = (settings.relative_step * x[j].abs()).max(settings.absolute_step);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let width = xp[j] - xm[j];
            f(&xp).iter().zip(f(&xm)).map(|(a, b)| (a - b) / width).collect()
        })
        .collect();
    DMatrix::from_fn(m, x.len(), |i, j| columns[j][i])
}

fn project(x: &mut [f64], lo: f64, hi: f64) {
    for v in x {
        *v = v.clamp(lo, hi);
    }
}

/// Minimizes `‖f(x)‖²` over the box `[lo, hi]ⁿ`, projecting every trial point
/// onto the box.
pub fn minimize<F>(f: F, x0: &[f64], lo: f64, hi: f64, settings: &LmSettings) -> LmOutcome
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut r = f(&x);
    let m = r.len();
    let mut cost = sum_sq(&r);
    let mut history = vec![cost];
    let mut damping = settings.initial_damping;
    let mut converged = cost == 0.0;
    let mut iterations = 0;

    while !converged && iterations < settings.max_iterations {
        iterations += 1;
        let jac = numeric_jacobian(&f, &x, m, settings);
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&DVector::from_column_slice(&r));
        let diag: Vec<f64> = (0..x.len()).map(|j| jtj[(j, j)].max(1e-30)).collect();

        let mut accepted = false;
        while damping <= settings.max_damping {
            let mut a = jtj.clone();
            for (j, d) in diag.iter().enumerate() {
                a[(j, j)] += damping * d;
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    damping *= settings.damping_factor;
                    continue;
                }
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            project(&mut trial, lo, hi);
            let delta: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let rel_step = norm(&delta) / norm(&x).max(f64::MIN_POSITIVE);
            let r_trial = f(&trial);
            let cost_trial = sum_sq(&r_trial);
            if cost_trial < cost {
                let rel_reduction = (cost.sqrt() - cost_trial.sqrt()) / cost.sqrt();
                x = trial;
                r = r_trial;
                cost = cost_trial;
                history.push(cost);
                damping /= settings.damping_factor;
                accepted = true;
                converged =
                    cost == 0.0 || rel_reduction < settings.residual_tolerance || rel_step < settings.step_tolerance;
                break;
            }
            if rel_step < settings.step_tolerance {
                // no representable improvement left
                converged = true;
                break;
            }
            damping *= settings.damping_factor;
        }
        if !accepted && !converged {
            break;
        }
    }

    let jacobian = numeric_jacobian(&f, &x, m, settings);
    LmOutcome {
        x,
        residuals: r,
        cost_history: history,
        iterations,
        converged,
        jacobian,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fits_exponential_decay() {
        // y = a exp(-b t) with a = 1.7, b = 1.3 mapped to the unit box
        let ts: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 1.7 * (-1.3 * t).exp()).collect();
        let f = |x: &[f64]| -> Vec<f64> {
            let (a, b) = (x[0] * 2.0 - 1.0, x[1] * 2.0 - 1.0);
            ts.iter().zip(&ys).map(|(t, y)| a * (-b * t).exp() - y).collect()
        };
        let out = minimize(f, &[1.5, 1.5], 1.0, 2.0, &LmSettings::default());
        assert!(out.converged);
        assert_relative_eq!(out.x[0] * 2.0 - 1.0, 1.7, max_relative = 1e-8);
        assert_relative_eq!(out.x[1] * 2.0 - 1.0, 1.3, max_relative = 1e-8);
        assert!(out.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_bounds() {
        // unconstrained minimum at x = 3 lies outside [1, 2]
        let f = |x: &[f64]| vec![x[0] - 3.0];
        let out = minimize(f, &[1.2], 1.0, 2.0, &LmSettings::default());
        assert_eq!(out.x[0], 2.0);
        assert!(out.converged);
    }

    #[test]
    fn rosenbrock_monotone_history() {
        let f = |x: &[f64]| {
            let (a, b) = (4.0 * (x[0] - 1.5), 4.0 * (x[1] - 1.5));
            vec![10.0 * (b - a * a), 1.0 - a]
        };
        let out = minimize(f, &[1.1, 1.9], 1.0, 2.0, &LmSettings::default());
        assert!(out.converged);
        assert_relative_eq!(out.x[0], 1.75, max_relative = 1e-6);
        assert_relative_eq!(out.x[1], 1.75, max_relative = 1e-6);
        assert!(out.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn iteration_cap() {
        let settings = LmSettings {
            max_iterations: 2,
            ..Default::default()
        };
        let f = |x: &[f64]| {
            let (a, b) = (4.0 * (x[0] - 1.5), 4.0 * (x[1] - 1.5));
            vec![10.0 * (b - a * a), 1.0 - a]
        };
        let out = minimize(f, &[1.1, 1.9], 1.0, 2.0, &settings);
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
