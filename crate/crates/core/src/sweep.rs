//! Synthetic probe sweeps: single line cuts, `(Δ, Ω)` maps, stepped-pump
//! measurement runs and additive detection noise.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    cooperativity, effective_linewidth, CavityParams, MechanicalParams, ModelError, ProbeResponse, PumpConfig,
    PumpDrive, PumpScheme,
};

/// Points in a default line cut.
pub const DEFAULT_LINE_POINTS: usize = 801;
/// Half-width of default probe windows, in units of the effective linewidth.
pub const DEFAULT_HALF_WIDTH_GAMMA_EFF: f64 = 25.0;
pub const DEFAULT_MAP_ROWS: usize = 201;
pub const DEFAULT_MAP_COLUMNS: usize = 401;
/// Half-span of default pump-detuning axes around the optimal sideband, in units of κ.
pub const DEFAULT_DETUNING_SPAN_KAPPA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("grid `{axis}` must be non-empty and strictly increasing (violated at index {index})")]
    BadGrid { axis: &'static str, index: usize },
    #[error("singular response at Δ = {delta} rad/s, Ω = {omega} rad/s: {source}")]
    Singular {
        delta: f64,
        omega: f64,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(ModelError),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("noise sigma must be finite and non-negative, got {0}")]
    BadNoise(f64),
}

/// Meaning of [`SweepTrace::omega`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    /// Probe offset from the pump, `Ω = ωp − ωd`.
    ProbeOffset,
    /// Absolute probe frequency `ωp`.
    AbsoluteProbe,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Complex(Vec<Complex64>),
    Magnitude(Vec<f64>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Complex(v) => v.len(),
            Samples::Magnitude(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        match self {
            Samples::Complex(v) => v.iter().map(|z| z.norm()).collect(),
            Samples::Magnitude(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedNoise {
    pub sigma: f64,
    pub seed: u64,
    /// Noise was added to `|S21|` because the trace carried no phase.
    pub on_magnitude: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scheme: PumpScheme,
    /// Absolute pump frequency `ωd`, rad/s.
    pub pump_omega: f64,
    /// Pump detuning used to generate the trace, when known.
    pub delta: Option<f64>,
    pub drive: Option<PumpDrive>,
    pub temperature_mk: Option<f64>,
    pub probe_power_dbm: Option<f64>,
    pub noise: Option<AppliedNoise>,
}

impl TraceMeta {
    pub fn for_pump(pump: &PumpConfig, cav: &CavityParams) -> Self {
        Self {
            scheme: pump.scheme,
            pump_omega: pump.pump_omega(cav),
            delta: Some(pump.delta),
            drive: Some(pump.drive),
            temperature_mk: None,
            probe_power_dbm: None,
            noise: None,
        }
    }
}

/// Probe transmission sampled along one probe sweep at a fixed pump.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrace {
    pub omega: Vec<f64>,
    pub axis: AxisKind,
    pub s21: Samples,
    pub meta: TraceMeta,
}

impl SweepTrace {
    pub fn new(omega: Vec<f64>, axis: AxisKind, s21: Samples, meta: TraceMeta) -> Result<Self, SweepError> {
        let trace = Self { omega, axis, s21, meta };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        check_grid("omega", &self.omega)?;
        if self.s21.len() != self.omega.len() {
            return Err(SweepError::BadGrid {
                axis: "s21",
                index: self.s21.len().min(self.omega.len()),
            });
        }
        let finite = match &self.s21 {
            Samples::Complex(v) => v.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())),
            Samples::Magnitude(v) => v.iter().position(|m| !(m.is_finite() && *m >= 0.0)),
        };
        match finite {
            Some(index) => Err(SweepError::BadGrid { axis: "s21", index }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.s21.magnitudes()
    }

    /// Absolute probe frequencies `ωp`.
    pub fn probe_omegas(&self) -> Vec<f64> {
        match self.axis {
            AxisKind::AbsoluteProbe => self.omega.clone(),
            AxisKind::ProbeOffset => self.omega.iter().map(|w| w + self.meta.pump_omega).collect(),
        }
    }

    /// Probe offsets `Ω = ωp − ωd`.
    pub fn offsets(&self) -> Vec<f64> {
        match self.axis {
            AxisKind::ProbeOffset => self.omega.clone(),
            AxisKind::AbsoluteProbe => self.omega.iter().map(|w| w - self.meta.pump_omega).collect(),
        }
    }

    /// Michelson visibility `(max − min)/(max + min)` of `|S21|` over the trace.
    pub fn visibility(&self) -> f64 {
        visibility(&self.magnitudes())
    }
}

/// Michelson visibility `(max − min)/(max + min)`; zero for an empty or all-zero slice.
pub fn visibility(mags: &[f64]) -> f64 {
    let (lo, hi) = mags.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| {
        (lo.min(m), hi.max(m))
    });
    if mags.is_empty() || hi + lo <= 0.0 {
        0.0
    } else {
        (hi - lo) / (hi + lo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub scheme: PumpScheme,
    pub drive: PumpDrive,
    pub omega_c: f64,
    pub temperature_mk: Option<f64>,
    pub probe_power_dbm: Option<f64>,
}

/// `|S21|` over a pump-detuning × probe-offset grid, stored row-major
/// (one row per `Δ`).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMap {
    pub delta_axis: Vec<f64>,
    pub omega_axis: Vec<f64>,
    pub s21_mag: Vec<f64>,
    pub meta: MapMeta,
}

impl SweepMap {
    pub fn rows(&self) -> usize {
        self.delta_axis.len()
    }

    pub fn columns(&self) -> usize {
        self.omega_axis.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.columns();
        &self.s21_mag[r * n..(r + 1) * n]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.s21_mag[r * self.columns() + c]
    }

    /// Index of the row whose `Δ` is closest to `delta`.
    pub fn nearest_row(&self, delta: f64) -> usize {
        nearest_index(&self.delta_axis, delta)
    }
}

pub fn nearest_index(axis: &[f64], x: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn check_grid(axis: &'static str, grid: &[f64]) -> Result<(), SweepError> {
    if grid.is_empty() {
        return Err(SweepError::BadGrid { axis, index: 0 });
    }
    if let Some(i) = grid.iter().position(|x| !x.is_finite()) {
        return Err(SweepError::BadGrid { axis, index: i });
    }
    match grid.windows(2).position(|w| !(w[1] > w[0])) {
        Some(i) => Err(SweepError::BadGrid { axis, index: i + 1 }),
        None => Ok(()),
    }
}

/// `n` equally spaced points over `center ± half_width`. For odd `n` the
/// middle point is exactly `center`; `n == 1` yields `[center]`.
pub fn centered_grid(center: f64, half_width: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![center];
    }
    let mid = (n - 1) as f64 / 2.0;
    let step = 2.0 * half_width / (n - 1) as f64;
    (0..n).map(|i| center + (i as f64 - mid) * step).collect()
}

/// Effective linewidth used to size probe windows. Falls back to a small
/// positive width when blue backaction has driven it through zero.
pub fn window_linewidth(scheme: PumpScheme, n_cav: f64, cav: &CavityParams, mech: &MechanicalParams) -> f64 {
    let coop = cooperativity(mech.g0, n_cav, cav.kappa, mech.gamma_m);
    effective_linewidth(mech, coop, scheme).abs().max(1e-3 * mech.gamma_m)
}

/// Default line-cut grid: 801 points over the mechanical feature ± 25 Γeff.
pub fn default_line_grid(pump: &PumpConfig, cav: &CavityParams, mech: &MechanicalParams) -> Vec<f64> {
    let n_cav = pump.photon_number(cav);
    let width = window_linewidth(pump.scheme, n_cav, cav, mech);
    centered_grid(
        pump.scheme.feature_offset(mech.omega_m),
        DEFAULT_HALF_WIDTH_GAMMA_EFF * width,
        DEFAULT_LINE_POINTS,
    )
}

/// Default map axes: 201 detunings over `∓Ωm ± 2κ` and 401 probe offsets over
/// `±Ωm ± 25 Γeff`, with `Γeff` taken at the optimal detuning.
pub fn default_map_grids(
    scheme: PumpScheme,
    drive: PumpDrive,
    cav: &CavityParams,
    mech: &MechanicalParams,
) -> (Vec<f64>, Vec<f64>) {
    let centre = PumpConfig {
        scheme,
        delta: scheme.optimal_detuning(mech.omega_m),
        drive,
    };
    let width = window_linewidth(scheme, centre.photon_number(cav), cav, mech);
    let deltas = centered_grid(centre.delta, DEFAULT_DETUNING_SPAN_KAPPA * cav.kappa, DEFAULT_MAP_ROWS);
    let omegas = centered_grid(
        scheme.feature_offset(mech.omega_m),
        DEFAULT_HALF_WIDTH_GAMMA_EFF * width,
        DEFAULT_MAP_COLUMNS,
    );
    (deltas, omegas)
}

fn evaluate_row(
    pump: &PumpConfig,
    cav: &CavityParams,
    mech: &MechanicalParams,
    omega_grid: &[f64],
) -> Result<Vec<Complex64>, SweepError> {
    let singular = |omega, source| SweepError::Singular {
        delta: pump.delta,
        omega,
        source,
    };
    let response = ProbeResponse::new(pump, cav, mech).map_err(|e| match e {
        ModelError::SingularDenominator { omega, .. } => singular(omega, e),
        other => SweepError::Model(other),
    })?;
    omega_grid
        .iter()
        .map(|&w| response.transmission(w).map_err(|e| singular(w, e)))
        .collect()
}

/// Complex `S21` at every probe offset in `omega_grid`.
pub fn simulate_line_cut(
    pump: &PumpConfig,
    cav: &CavityParams,
    mech: &MechanicalParams,
    omega_grid: &[f64],
) -> Result<SweepTrace, SweepError> {
    check_grid("omega", omega_grid)?;
    let s21 = evaluate_row(pump, cav, mech, omega_grid)?;
    Ok(SweepTrace {
        omega: omega_grid.to_vec(),
        axis: AxisKind::ProbeOffset,
        s21: Samples::Complex(s21),
        meta: TraceMeta::for_pump(pump, cav),
    })
}

/// `|S21|` over a `(Δ, Ω)` grid.
///
/// A [`PumpDrive::PhotonNumber`] drive holds `n_cav` fixed on every row; a
/// [`PumpDrive::InputPower`] drive recomputes `n_cav` from each row's `Δ`.
/// Rows are evaluated in parallel; the output is independent of scheduling.
pub fn simulate_map(
    drive: PumpDrive,
    scheme: PumpScheme,
    cav: &CavityParams,
    mech: &MechanicalParams,
    delta_grid: &[f64],
    omega_grid: &[f64],
) -> Result<SweepMap, SweepError> {
    check_grid("delta", delta_grid)?;
    check_grid("omega", omega_grid)?;
    let rows: Vec<Vec<Complex64>> = delta_grid
        .par_iter()
        .map(|&delta| {
            let pump = PumpConfig { scheme, delta, drive };
            pump.validate().map_err(SweepError::Model)?;
            evaluate_row(&pump, cav, mech, omega_grid)
        })
        .collect::<Result<_, _>>()?;
    Ok(SweepMap {
        delta_axis: delta_grid.to_vec(),
        omega_axis: omega_grid.to_vec(),
        s21_mag: rows.into_iter().flatten().map(|z| z.norm()).collect(),
        meta: MapMeta {
            scheme,
            drive,
            omega_c: cav.omega_c,
            temperature_mk: None,
            probe_power_dbm: None,
        },
    })
}

/// One pump-power setting of a stepped-pump run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub drive: PumpDrive,
    pub temperature_mk: Option<f64>,
    pub probe_power_dbm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSettings {
    /// Pump detunings per run, spread over the optimal sideband ± `detuning_span`.
    pub n_pump_steps: usize,
    /// Half-width of each probe sweep in units of `Γeff` at the optimal detuning.
    pub sweep_half_width: f64,
    pub points_per_sweep: usize,
    /// Half-span of the pump-detuning steps, rad/s. Defaults to 2κ.
    pub detuning_span: Option<f64>,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        Self {
            n_pump_steps: 41,
            sweep_half_width: DEFAULT_HALF_WIDTH_GAMMA_EFF,
            points_per_sweep: DEFAULT_LINE_POINTS,
            detuning_span: None,
        }
    }
}

/// Emulates the two-tone measurement: for every run, the pump is stepped
/// across the cavity and at each step a narrow probe sweep is taken around
/// the mechanical sideband `ωd ± Ωm`.
///
/// Traces are returned run by run, steps in increasing `Δ`.
pub fn emulate_protocol(
    runs: &[ProtocolRun],
    scheme: PumpScheme,
    cav: &CavityParams,
    mech: &MechanicalParams,
    settings: &ProtocolSettings,
) -> Result<Vec<SweepTrace>, SweepError> {
    if settings.n_pump_steps == 0 {
        return Err(SweepError::InvalidProtocol("n_pump_steps must be at least 1".into()));
    }
    if settings.points_per_sweep < 2 || !(settings.sweep_half_width > 0.0) {
        return Err(SweepError::InvalidProtocol(
            "each sweep needs at least 2 points and a positive width".into(),
        ));
    }
    let span = settings
        .detuning_span
        .unwrap_or(DEFAULT_DETUNING_SPAN_KAPPA * cav.kappa);
    if settings.n_pump_steps > 1 && !(span >= 0.5 * cav.kappa) {
        return Err(SweepError::InvalidProtocol(format!(
            "detuning span {span} rad/s leaves the sweep centres short of ωc ± κ/2"
        )));
    }
    let optimal = scheme.optimal_detuning(mech.omega_m);
    let centre = scheme.feature_offset(mech.omega_m);
    let deltas = centered_grid(optimal, span, settings.n_pump_steps);

    let mut traces = Vec::with_capacity(runs.len() * deltas.len());
    for run in runs {
        let at_optimal = PumpConfig::new(scheme, optimal, run.drive).map_err(SweepError::Model)?;
        let width = window_linewidth(scheme, at_optimal.photon_number(cav), cav, mech);
        let grid = centered_grid(centre, settings.sweep_half_width * width, settings.points_per_sweep);
        for &delta in &deltas {
            let mut trace = simulate_line_cut(&at_optimal.with_delta(delta), cav, mech, &grid)?;
            trace.meta.temperature_mk = run.temperature_mk;
            trace.meta.probe_power_dbm = run.probe_power_dbm;
            traces.push(trace);
        }
    }
    Ok(traces)
}

/// Additive white Gaussian noise with standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

/// Adds noise to each quadrature of complex samples, or to the magnitude of
/// magnitude-only samples (flagged in the trace metadata). Deterministic for
/// a given seed; `sigma == 0` returns the trace unchanged.
pub fn add_noise(trace: &SweepTrace, noise: &NoiseSpec) -> Result<SweepTrace, SweepError> {
    if !(noise.sigma >= 0.0) || !noise.sigma.is_finite() {
        return Err(SweepError::BadNoise(noise.sigma));
    }
    if noise.sigma == 0.0 {
        return Ok(trace.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = Normal::new(0.0, noise.sigma).map_err(|_| SweepError::BadNoise(noise.sigma))?;
    let (s21, on_magnitude) = match &trace.s21 {
        Samples::Complex(v) => (
            Samples::Complex(
                v.iter()
                    .map(|z| {
                        let re = normal.sample(&mut rng);
                        let im = normal.sample(&mut rng);
                        z + Complex64::new(re, im)
                    })
                    .collect(),
            ),
            false,
        ),
        Samples::Magnitude(v) => (
            Samples::Magnitude(v.iter().map(|m| (m + normal.sample(&mut rng)).abs()).collect()),
            true,
        ),
    };
    let mut out = trace.clone();
    out.s21 = s21;
    out.meta.noise = Some(AppliedNoise {
        sigma: noise.sigma,
        seed: noise.seed,
        on_magnitude,
    });
    Ok(out)
}
