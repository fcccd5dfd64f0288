use std::collections::HashMap;

use rayon::prelude::*;

use super::params::{BindingMode, Coordinate, ParamBinding, ParamName, SharedBinding};
use super::FitError;
use crate::model::{CavityParams, MechanicalParams, ProbeResponse, PumpConfig, PumpDrive, PumpScheme};
use crate::sweep::SweepTrace;

/// Residual assigned to points whose trial parameters make the model
/// singular or invalid.
pub const PENALTY_RESIDUAL: f64 = 1e3;

/// One measured `|S21|` sample with the tone frequencies it was taken at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    /// Absolute probe frequency, rad/s.
    pub probe_omega: f64,
    /// Absolute pump frequency, rad/s.
    pub pump_omega: f64,
    pub magnitude: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDataset {
    pub label: String,
    pub scheme: PumpScheme,
    /// Pump power in watts when the dataset is calibrated by power rather
    /// than photon number; `n_cav` then follows from each point's detuning
    /// and the `n_cav` binding is unused.
    pub input_power: Option<f64>,
    pub points: Vec<DataPoint>,
    pub bindings: Vec<ParamBinding>,
}

impl FitDataset {
    /// Collects every sample of `traces` with unit weight.
    pub fn from_traces(
        label: impl Into<String>,
        scheme: PumpScheme,
        traces: &[SweepTrace],
        bindings: Vec<ParamBinding>,
    ) -> Self {
        let points = traces
            .iter()
            .flat_map(|t| {
                let pump = t.meta.pump_omega;
                t.probe_omegas()
                    .into_iter()
                    .zip(t.magnitudes())
                    .map(move |(probe_omega, magnitude)| DataPoint {
                        probe_omega,
                        pump_omega: pump,
                        magnitude,
                        weight: 1.0,
                    })
            })
            .collect();
        Self {
            label: label.into(),
            scheme,
            input_power: None,
            points,
            bindings,
        }
    }

    pub fn binding(&self, name: ParamName) -> Option<&ParamBinding> {
        self.bindings.iter().find(|b| b.name == name)
    }
}

/// Datasets fitted jointly, with parameters fixed, free per dataset or
/// shared across datasets through group ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitProblem {
    pub datasets: Vec<FitDataset>,
    pub shared: Vec<SharedBinding>,
}

/// Where a slot of the optimizer vector lives.
#[derive(Debug, Clone, PartialEq)]
pub enum Scope {
    Dataset(usize),
    Shared(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Slot {
    pub name: ParamName,
    pub scope: Scope,
    pub coord: Coordinate,
    pub init: f64,
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Fixed(f64),
    Slot(usize),
}

/// Resolved mapping from the optimizer vector to each dataset's parameters.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub slots: Vec<Slot>,
    sources: Vec<[Source; 7]>,
}

impl Layout {
    pub(crate) fn new(problem: &FitProblem) -> Result<Self, FitError> {
        let invalid = |msg: String| FitError::InvalidProblem(msg);
        let mut slots = Vec::new();
        let mut shared_slots: HashMap<&str, (usize, ParamName)> = HashMap::new();
        for group in &problem.shared {
            if shared_slots.contains_key(group.id.as_str()) {
                return Err(invalid(format!("duplicate shared group '{}'", group.id)));
            }
            let coord = Coordinate::new(
                group.name,
                group.bounds,
                group.init,
                &format!("shared group '{}'", group.id),
            )?;
            shared_slots.insert(&group.id, (slots.len(), group.name));
            slots.push(Slot {
                name: group.name,
                scope: Scope::Shared(group.id.clone()),
                coord,
                init: group.init,
            });
        }
        let mut used = vec![false; problem.shared.len()];
        let mut sources = Vec::with_capacity(problem.datasets.len());
        for (d, ds) in problem.datasets.iter().enumerate() {
            let mut src = [Source::Fixed(f64::NAN); 7];
            let mut seen = [false; 7];
            for b in &ds.bindings {
                let i = b.name.index();
                if seen[i] {
                    return Err(invalid(format!("dataset '{}' binds {} twice", ds.label, b.name)));
                }
                seen[i] = true;
                if b.name == ParamName::NCav && ds.input_power.is_some() && b.mode != BindingMode::Fixed {
                    return Err(invalid(format!(
                        "dataset '{}' is calibrated by input power; n_cav cannot be fitted",
                        ds.label
                    )));
                }
                src[i] = match &b.mode {
                    BindingMode::Fixed => {
                        if !b.init.is_finite() {
                            return Err(invalid(format!(
                                "dataset '{}': fixed {} is not finite",
                                ds.label, b.name
                            )));
                        }
                        Source::Fixed(b.init)
                    }
                    BindingMode::Free => {
                        let what = format!("dataset '{}'", ds.label);
                        let coord = Coordinate::new(b.name, b.bounds, b.init, &what)?;
                        slots.push(Slot {
                            name: b.name,
                            scope: Scope::Dataset(d),
                            coord,
                            init: b.init,
                        });
                        Source::Slot(slots.len() - 1)
                    }
                    BindingMode::Shared(id) => {
                        let &(slot, name) = shared_slots.get(id.as_str()).ok_or_else(|| {
                            invalid(format!("dataset '{}' references unknown group '{id}'", ds.label))
                        })?;
                        if name != b.name {
                            return Err(invalid(format!(
                                "dataset '{}' binds {} to group '{id}' which holds {name}",
                                ds.label, b.name
                            )));
                        }
                        used[slot] = true;
                        Source::Slot(slot)
                    }
                };
            }
            if let Some(missing) = ParamName::ALL.iter().find(|p| !seen[p.index()]) {
                let power_calibrated = *missing == ParamName::NCav && ds.input_power.is_some();
                if !power_calibrated {
                    return Err(invalid(format!("dataset '{}' has no binding for {missing}", ds.label)));
                }
            }
            sources.push(src);
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(invalid(format!(
                "shared group '{}' is not used by any dataset",
                problem.shared[i].id
            )));
        }
        Ok(Self { slots, sources })
    }

    pub(crate) fn initial(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.coord.to_internal(s.init)).collect()
    }

    /// Physical parameter values of dataset `d`, indexed by [`ParamName::index`].
    pub(crate) fn values(&self, d: usize, u: &[f64]) -> [f64; 7] {
        self.sources[d].map(|s| match s {
            Source::Fixed(v) => v,
            Source::Slot(i) => self.slots[i].coord.to_physical(u[i]),
        })
    }
}

/// Model `|S21|` at every point of `ds` for the given physical parameters.
/// `None` marks points where the model is singular or the parameters are
/// invalid.
pub fn model_magnitudes(ds: &FitDataset, values: &[f64; 7]) -> Vec<Option<f64>> {
    let v = |p: ParamName| values[p.index()];
    let cav = CavityParams {
        omega_c: v(ParamName::OmegaC),
        kappa: v(ParamName::Kappa),
        kappa_ext: v(ParamName::KappaExt),
    };
    let mech = MechanicalParams {
        omega_m: v(ParamName::OmegaM),
        gamma_m: v(ParamName::GammaM),
        g0: v(ParamName::G0),
    };
    let drive = match ds.input_power {
        Some(p) => PumpDrive::InputPower(p),
        None => PumpDrive::PhotonNumber(v(ParamName::NCav)),
    };
    let mut cached: Option<(f64, Option<ProbeResponse>)> = None;
    ds.points
        .iter()
        .map(|p| {
            let response = match cached {
                Some((pump, r)) if pump == p.pump_omega => r,
                _ => {
                    let pump = PumpConfig {
                        scheme: ds.scheme,
                        delta: p.pump_omega - cav.omega_c,
                        drive,
                    };
                    let r = ProbeResponse::new(&pump, &cav, &mech).ok();
                    cached = Some((p.pump_omega, r));
                    r
                }
            }?;
            response
                .transmission(p.probe_omega - p.pump_omega)
                .ok()
                .map(|z| z.norm())
        })
        .collect()
}

fn dataset_residuals(ds: &FitDataset, values: &[f64; 7]) -> Vec<f64> {
    model_magnitudes(ds, values)
        .into_iter()
        .zip(&ds.points)
        .map(|(m, p)| match m {
            Some(m) if m.is_finite() => p.weight * (m - p.magnitude),
            _ => PENALTY_RESIDUAL,
        })
        .collect()
}

impl FitProblem {
    pub fn total_points(&self) -> usize {
        self.datasets.iter().map(|d| d.points.len()).sum()
    }

    pub(crate) fn residuals_internal(&self, layout: &Layout, u: &[f64]) -> Vec<f64> {
        self.datasets
            .par_iter()
            .enumerate()
            .map(|(d, ds)| dataset_residuals(ds, &layout.values(d, u)))
            .collect::<Vec<_>>()
            .concat()
    }

    /// Weighted residuals `w·(|S21_model| − |S21_data|)`, dataset by dataset,
    /// for a parameter vector in problem order (shared groups first, then
    /// each dataset's free parameters in binding order) and physical units.
    pub fn residuals(&self, params: &[f64]) -> Result<Vec<f64>, FitError> {
        let layout = Layout::new(self)?;
        if params.len() != layout.slots.len() {
            return Err(FitError::InvalidProblem(format!(
                "expected {} parameters, got {}",
                layout.slots.len(),
                params.len()
            )));
        }
        let u: Vec<f64> = layout
            .slots
            .iter()
            .zip(params)
            .map(|(s, &x)| s.coord.to_internal(x))
            .collect();
        Ok(self.residuals_internal(&layout, &u))
    }

    /// Names and scopes of the parameter vector expected by [`FitProblem::residuals`].
    pub fn parameter_order(&self) -> Result<Vec<(ParamName, Scope)>, FitError> {
        Ok(Layout::new(self)?
            .slots
            .into_iter()
            .map(|s| (s.name, s.scope))
            .collect())
    }
}
