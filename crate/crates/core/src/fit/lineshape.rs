//! Model-free reads of a single trace: starting values for the fitter and
//! the numeric width of the optomechanical feature.
//!
//! Depths and widths are measured on transmitted power `|S21|²`. On the
//! optimal sideband the power feature is an exact Lorentzian of width Γeff
//! on top of the cavity background, and the bare notch an exact Lorentzian
//! of width κ, which half-depths of `|S21|` are not.

use super::FitError;
use crate::sweep::SweepTrace;

/// Minimum number of samples inside the measured full width.
pub const MIN_SAMPLES_PER_WIDTH: usize = 20;
/// Features below this contrast relative to the background are treated as absent.
const RELATIVE_CONTRAST_FLOOR: f64 = 1e-6;
/// Contrast must exceed this multiple of the noise estimate.
const NOISE_MULTIPLE: f64 = 3.0;

/// Rough starting values read off a trace. Each field is present only when
/// the corresponding structure was found.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InitialGuess {
    /// Absolute frequency of the transmission minimum, rad/s.
    pub omega_c: Option<f64>,
    /// Full width at half power depth of that minimum, rad/s.
    pub kappa: Option<f64>,
    /// Absolute probe frequency of the largest narrow deviation from a smooth background, rad/s.
    pub feature_center: Option<f64>,
}

/// Noise standard deviation estimated from the median absolute second difference.
pub fn noise_estimate(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let mut d2: Vec<f64> = values.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]).abs()).collect();
    d2.sort_by(f64::total_cmp);
    let median = d2[d2.len() / 2];
    // second differences of white noise have standard deviation √6 σ
    median / (0.674_489_750_196_081_7 * 6f64.sqrt())
}

fn moving_average(values: &[f64], half: usize) -> Vec<f64> {
    if half == 0 {
        return values.to_vec();
    }
    let n = values.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Least-squares quadratic through the outer quarter of samples on each side,
/// evaluated on the whole axis.
fn wing_baseline(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let wing = (n / 4).max(2).min(n);
    let idx: Vec<usize> = (0..wing).chain(n.saturating_sub(wing)..n).collect();
    // centre and scale the abscissa for conditioning
    let x0 = 0.5 * (x[0] + x[n - 1]);
    let s = (0.5 * (x[n - 1] - x[0])).max(f64::MIN_POSITIVE);
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for &i in &idx {
        let t = (x[i] - x0) / s;
        let row = nalgebra::Vector3::new(1.0, t, t * t);
        ata += row * row.transpose();
        aty += row * y[i];
    }
    let coef = ata
        .try_inverse()
        .map(|inv| inv * aty)
        .unwrap_or_else(|| nalgebra::Vector3::new(idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64, 0.0, 0.0));
    x.iter()
        .map(|&xi| {
            let t = (xi - x0) / s;
            coef[0] + coef[1] * t + coef[2] * t * t
        })
        .collect()
}

struct Feature {
    index: usize,
    contrast: f64,
    deviation: Vec<f64>,
}

/// Largest deviation of `values` from the wing baseline, if significant.
fn find_feature(x: &[f64], values: &[f64]) -> Option<Feature> {
    if x.len() < 5 {
        return None;
    }
    let base = wing_baseline(x, values);
    let deviation: Vec<f64> = values.iter().zip(&base).map(|(v, b)| v - b).collect();
    let index = (0..deviation.len()).max_by(|&a, &b| deviation[a].abs().total_cmp(&deviation[b].abs()))?;
    let contrast = deviation[index];
    let noise = noise_estimate(&deviation);
    let floor = RELATIVE_CONTRAST_FLOOR * base[index].abs();
    if contrast.abs() < NOISE_MULTIPLE * noise || contrast.abs() <= floor {
        return None;
    }
    Some(Feature {
        index,
        contrast,
        deviation,
    })
}

/// Crossing of the half-contrast level on either side of `centre`, by linear
/// interpolation between the bracketing samples.
fn half_level_crossings(x: &[f64], deviation: &[f64], centre: usize, contrast: f64) -> Option<(f64, f64)> {
    let half = 0.5 * contrast.abs();
    let level = |i: usize| deviation[i] * contrast.signum();
    let interpolate = |inside: usize, outside: usize| {
        let (a, b) = (level(inside), level(outside));
        x[inside] + (x[outside] - x[inside]) * (a - half) / (a - b)
    };
    let left = (0..centre)
        .rev()
        .find(|&i| level(i) < half)
        .map(|i| interpolate(i + 1, i))?;
    let right = (centre + 1..x.len())
        .find(|&i| level(i) < half)
        .map(|i| interpolate(i - 1, i))?;
    Some((left, right))
}

/// Full width at half contrast of the optomechanical feature, rad/s.
///
/// The feature is located as the largest deviation of `|S21|²` from a
/// quadratic background fitted to the outer quarters of the trace, so the
/// trace must extend well beyond the feature on both sides.
pub fn extract_linewidth(trace: &SweepTrace) -> Result<f64, FitError> {
    let x = &trace.omega;
    let power: Vec<f64> = trace.magnitudes().iter().map(|m| m * m).collect();
    let feature = find_feature(x, &power).ok_or(FitError::FeatureNotFound)?;
    let (left, right) = half_level_crossings(x, &feature.deviation, feature.index, feature.contrast)
        .ok_or(FitError::FeatureNotFound)?;
    let inside = x.iter().filter(|&&w| w >= left && w <= right).count();
    if inside < MIN_SAMPLES_PER_WIDTH {
        return Err(FitError::UnderResolved {
            samples: inside,
            required: MIN_SAMPLES_PER_WIDTH,
        });
    }
    Ok(right - left)
}

/// Starting values for `ωc`, `κ` and the mechanical feature position.
pub fn init_heuristics(trace: &SweepTrace) -> Result<InitialGuess, FitError> {
    let x = trace.probe_omegas();
    let mags = trace.magnitudes();
    let n = x.len();
    if n < 5 {
        return Err(FitError::FeatureNotFound);
    }
    let mut guess = InitialGuess::default();

    let smooth = moving_average(&mags, n / 200);
    let imin = (0..n).min_by(|&a, &b| smooth[a].total_cmp(&smooth[b])).unwrap_or(0);
    let edge = (n / 20).max(1);
    if imin >= edge && imin < n - edge {
        let power: Vec<f64> = smooth.iter().map(|m| m * m).collect();
        let background = power[0].max(power[n - 1]);
        let depth = background - power[imin];
        let noise = noise_estimate(&mags.iter().map(|m| m * m).collect::<Vec<_>>());
        if depth >= NOISE_MULTIPLE * noise && depth > RELATIVE_CONTRAST_FLOOR * background {
            guess.omega_c = Some(x[imin]);
            let deviation: Vec<f64> = power.iter().map(|p| p - background).collect();
            if let Some((l, r)) = half_level_crossings(&x, &deviation, imin, -depth) {
                guess.kappa = Some(r - l);
            }
        }
    }

    if let Some(f) = find_feature(&x, &mags) {
        guess.feature_center = Some(x[f.index]);
    }

    if guess.omega_c.is_none() && guess.feature_center.is_none() {
        return Err(FitError::FeatureNotFound);
    }
    Ok(guess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CavityParams, MechanicalParams, PumpConfig, PumpDrive, PumpScheme};
    use crate::sweep::{centered_grid, default_line_grid, simulate_line_cut, AxisKind, Samples, TraceMeta};
    use crate::units::{hz_to_rad, rad_to_hz};
    use approx::assert_relative_eq;

    fn mech() -> MechanicalParams {
        MechanicalParams::from_hz(3.8e6, 15.3, 0.56).unwrap()
    }

    fn cav(kappa_khz: f64) -> CavityParams {
        CavityParams::from_hz(6e9, kappa_khz * 1e3, 44e3).unwrap()
    }

    fn sideband_trace(scheme: PumpScheme, n_cav: f64, kappa_khz: f64) -> SweepTrace {
        let pump = PumpConfig::on_sideband(scheme, mech().omega_m, PumpDrive::PhotonNumber(n_cav)).unwrap();
        // 4001 points over ±25 Γeff: 80 samples per linewidth
        let default = default_line_grid(&pump, &cav(kappa_khz), &mech());
        let grid = centered_grid(default[400], default[400] - default[0], 4001);
        simulate_line_cut(&pump, &cav(kappa_khz), &mech(), &grid).unwrap()
    }

    #[test]
    fn red_linewidth_matches_backaction() {
        let fwhm = rad_to_hz(extract_linewidth(&sideband_trace(PumpScheme::Red, 1.3e6, 84.0)).unwrap());
        assert_relative_eq!(fwhm, 34.713, max_relative = 0.02);
    }

    #[test]
    fn blue_linewidth_matches_backaction() {
        let fwhm = rad_to_hz(extract_linewidth(&sideband_trace(PumpScheme::Blue, 3.4e5, 83.0)).unwrap());
        assert_relative_eq!(fwhm, 10.161, max_relative = 0.02);
    }

    #[test]
    fn no_pump_no_feature() {
        assert_eq!(
            extract_linewidth(&sideband_trace(PumpScheme::Red, 0.0, 84.0)),
            Err(FitError::FeatureNotFound)
        );
    }

    #[test]
    fn coarse_grid_is_under_resolved() {
        let pump = PumpConfig::on_sideband(PumpScheme::Red, mech().omega_m, PumpDrive::PhotonNumber(1.3e6)).unwrap();
        let grid = centered_grid(mech().omega_m, hz_to_rad(25.0 * 34.7), 61);
        let trace = simulate_line_cut(&pump, &cav(84.0), &mech(), &grid).unwrap();
        assert!(matches!(extract_linewidth(&trace), Err(FitError::UnderResolved { .. })));
    }

    #[test]
    fn bare_notch_kappa_guess() {
        let c = cav(100.0);
        let pump = PumpConfig::new(PumpScheme::Red, -mech().omega_m, PumpDrive::PhotonNumber(0.0)).unwrap();
        let grid = centered_grid(mech().omega_m, 5.0 * c.kappa, 1001);
        let trace = simulate_line_cut(&pump, &c, &mech(), &grid).unwrap();
        let guess = init_heuristics(&trace).unwrap();
        assert_relative_eq!(guess.kappa.unwrap(), c.kappa, max_relative = 0.05);
        assert!((guess.omega_c.unwrap() - c.omega_c).abs() <= grid[1] - grid[0]);
    }

    #[test]
    fn flat_trace_has_no_feature() {
        let trace = SweepTrace::new(
            (0..200).map(|i| i as f64).collect(),
            AxisKind::ProbeOffset,
            Samples::Magnitude(vec![0.8; 200]),
            TraceMeta::for_pump(
                &PumpConfig::new(PumpScheme::Red, 0.0, PumpDrive::PhotonNumber(0.0)).unwrap(),
                &cav(100.0),
            ),
        )
        .unwrap();
        assert_eq!(init_heuristics(&trace), Err(FitError::FeatureNotFound));
        assert_eq!(extract_linewidth(&trace), Err(FitError::FeatureNotFound));
    }

    #[test]
    fn omit_feature_centre() {
        let trace = sideband_trace(PumpScheme::Red, 1.3e6, 84.0);
        let guess = init_heuristics(&trace).unwrap();
        let step = trace.omega[1] - trace.omega[0];
        let centre = guess.feature_center.unwrap() - trace.meta.pump_omega;
        assert!((centre - mech().omega_m).abs() <= 2.0 * step);
    }

    #[test]
    fn noise_estimate_of_white_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 0.02).unwrap();
        let xs: Vec<f64> = (0..20_000).map(|_| normal.sample(&mut rng)).collect();
        assert_relative_eq!(noise_estimate(&xs), 0.02, max_relative = 0.05);
    }
}
