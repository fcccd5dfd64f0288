use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use omit_core::fit::{
    fit_with, lm::LmSettings, model_magnitudes, FitDataset, FitError, FitProblem, FitResult, ParamBinding, ParamName,
    Scope, SharedBinding,
};
use omit_core::sweep::{centered_grid, window_linewidth};
use omit_core::{
    add_noise, cooperativity, emulate_protocol, intracavity_photon_number, rad_to_hz, simulate_line_cut, simulate_map,
    NoiseSpec, ProtocolRun, ProtocolSettings, PumpConfig, PumpDrive, PumpScheme, SweepTrace,
};
use serde::{Deserialize, Serialize};

use crate::config::{to_internal, to_public, Condition, ModeConfig, RunConfig};
use crate::dataset::DatasetFile;
use crate::error::CliError;
use crate::svg;

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::write(path, e))?;
    tmp.write_all(contents).map_err(|e| CliError::write(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::write(path, e))?;
    tmp.persist(path).map_err(|e| CliError::write(path, e.error))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    DatasetFile::parse(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        line: e.line,
        message: e.message,
    })
}

fn display_mag(m: f64, db: bool) -> f64 {
    if db {
        20.0 * m.log10()
    } else {
        m
    }
}

fn mag_label(db: bool) -> &'static str {
    if db {
        "|S21| (dB)"
    } else {
        "|S21|"
    }
}

/// Noise seed of trace `k` of condition `i`.
fn trace_seed(base: u64, i: usize, k: usize) -> u64 {
    base ^ ((i as u64) << 32) ^ k as u64
}

/// Options shared by `simulate` and `map`.
#[derive(Debug, Clone, Copy, Default)]
pub struct OutputOptions {
    pub svg: bool,
    pub db: bool,
    pub seed: Option<u64>,
}

/// Line cut (or stepped-pump run with `protocol`) for one condition, noise
/// included.
pub fn simulate_condition(
    config: &RunConfig,
    c: &Condition,
    index: usize,
    protocol: bool,
    seed: Option<u64>,
) -> Result<Vec<SweepTrace>, CliError> {
    let context = format!("pump '{}'", c.label);
    let scheme = c.pump.scheme;
    let traces = if protocol {
        let p = &config.grid.protocol;
        let settings = ProtocolSettings {
            n_pump_steps: p.pump_steps,
            sweep_half_width: p.half_width_gamma_eff,
            points_per_sweep: p.points_per_sweep,
            detuning_span: Some(p.detuning_span_kappa * c.cavity.kappa),
        };
        let run = ProtocolRun {
            drive: c.pump.drive,
            temperature_mk: c.temperature_mk,
            probe_power_dbm: c.probe_power_dbm,
        };
        emulate_protocol(&[run], scheme, &c.cavity, &c.mechanics, &settings)
            .map_err(|e| CliError::sweep(&context, e))?
    } else {
        let width = window_linewidth(scheme, c.pump.photon_number(&c.cavity), &c.cavity, &c.mechanics);
        let grid = centered_grid(
            scheme.feature_offset(c.mechanics.omega_m),
            config.grid.half_width_gamma_eff * width,
            config.grid.line_points,
        );
        let mut trace =
            simulate_line_cut(&c.pump, &c.cavity, &c.mechanics, &grid).map_err(|e| CliError::sweep(&context, e))?;
        trace.meta.temperature_mk = c.temperature_mk;
        trace.meta.probe_power_dbm = c.probe_power_dbm;
        vec![trace]
    };
    match &config.noise {
        Some(noise) if noise.sigma > 0.0 => {
            let base = seed.unwrap_or(noise.seed);
            traces
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let spec = NoiseSpec {
                        sigma: noise.sigma,
                        seed: trace_seed(base, index, k),
                    };
                    add_noise(t, &spec).map_err(|e| CliError::sweep(&context, e))
                })
                .collect()
        }
        _ => Ok(traces),
    }
}

pub fn cmd_simulate(
    config: &RunConfig,
    conditions: &[Condition],
    protocol: bool,
    opts: OutputOptions,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let traces = conditions
        .iter()
        .enumerate()
        .map(|(i, c)| simulate_condition(config, c, i, protocol, opts.seed))
        .collect::<Result<Vec<_>, _>>()?;
    ensure_dir(out)?;
    let mut written = Vec::new();
    for (c, traces) in conditions.iter().zip(&traces) {
        let file = DatasetFile::from_traces(traces, Some(c.label.clone()));
        let path = out.join(format!("{}.csv", c.label));
        write_atomic(&path, file.to_csv().as_bytes())?;
        written.push(path);
        if opts.svg {
            let offset = config.display.offset_hz.unwrap_or_else(|| rad_to_hz(c.cavity.omega_c));
            let series: Vec<_> = file
                .traces()
                .iter()
                .map(|t| {
                    let x = t.omega.iter().map(|&w| rad_to_hz(w) - offset).collect();
                    let y = t.magnitudes().iter().map(|&m| display_mag(m, opts.db)).collect();
                    (x, y)
                })
                .collect();
            let title = format!("{} pump, {}", c.pump.scheme, c.label);
            let x_label = format!("probe frequency − {offset:e} Hz");
            let path = out.join(format!("{}.svg", c.label));
            write_atomic(
                &path,
                svg::line_plot(&series, &title, &x_label, mag_label(opts.db)).as_bytes(),
            )?;
            written.push(path);
        }
    }
    Ok(written)
}

pub fn cmd_map(
    config: &RunConfig,
    conditions: &[Condition],
    opts: OutputOptions,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let g = &config.grid;
    let mut maps = Vec::new();
    for c in conditions {
        let scheme = c.pump.scheme;
        let optimal = scheme.optimal_detuning(c.mechanics.omega_m);
        let centre = PumpConfig {
            delta: optimal,
            ..c.pump
        };
        let width = window_linewidth(scheme, centre.photon_number(&c.cavity), &c.cavity, &c.mechanics);
        let deltas = centered_grid(optimal, g.detuning_span_kappa * c.cavity.kappa, g.map_rows);
        let omegas = centered_grid(
            scheme.feature_offset(c.mechanics.omega_m),
            g.half_width_gamma_eff * width,
            g.map_columns,
        );
        let mut map = simulate_map(c.pump.drive, scheme, &c.cavity, &c.mechanics, &deltas, &omegas)
            .map_err(|e| CliError::sweep(&format!("pump '{}'", c.label), e))?;
        map.meta.temperature_mk = c.temperature_mk;
        map.meta.probe_power_dbm = c.probe_power_dbm;
        maps.push(map);
    }
    ensure_dir(out)?;
    let mut written = Vec::new();
    for (c, map) in conditions.iter().zip(&maps) {
        let path = out.join(format!("{}_map.csv", c.label));
        write_atomic(&path, crate::dataset::map_to_csv(map).as_bytes())?;
        written.push(path);
        if opts.svg {
            // Axes centred on the sideband: Ω ∓ Ωm and Δ ± Ωm.
            let scheme = c.pump.scheme;
            let feature = scheme.feature_offset(c.mechanics.omega_m);
            let optimal = scheme.optimal_detuning(c.mechanics.omega_m);
            let x: Vec<f64> = map.omega_axis.iter().map(|&w| rad_to_hz(w - feature)).collect();
            let y: Vec<f64> = map.delta_axis.iter().map(|&d| rad_to_hz(d - optimal)).collect();
            let z: Vec<f64> = map.s21_mag.iter().map(|&m| display_mag(m, opts.db)).collect();
            let (xl, yl) = match scheme {
                PumpScheme::Red => ("Ω − Ωm (Hz)", "Δ + Ωm (Hz)"),
                PumpScheme::Blue => ("Ω + Ωm (Hz)", "Δ − Ωm (Hz)"),
            };
            let title = format!("{} {}", mag_label(opts.db), c.label);
            let path = out.join(format!("{}_map.svg", c.label));
            write_atomic(&path, svg::heatmap(&x, &y, &z, &title, xl, yl).as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

struct BindingDefault {
    mode: ModeConfig,
    init: Option<f64>,
    lo: f64,
    hi: f64,
}

/// Builds the joint problem for `files` (label, dataset) from the config's
/// cavity and mechanics and its binding overrides.
///
/// Defaults: `ωc` and `κ` free per dataset, `Ωm` and `Γm` shared per
/// temperature, `κext`, `g0` and `n_cav` fixed, with `n_cav` taken from the
/// file. A file calibrated by pump power instead derives `n_cav` from it.
pub fn build_problem(config: &RunConfig, files: &[(String, DatasetFile)]) -> Result<FitProblem, CliError> {
    let cav = config.cavity.params()?;
    let mech = config.mechanics.params()?;
    let mut problem = FitProblem::default();
    for (label, file) in files {
        let suffix = file.temperature_mk.map(|t| format!("@{t}mK")).unwrap_or_default();
        let n_override = config.fit.bindings.iter().any(|b| b.param == ParamName::NCav);
        let input_power = match file.drive() {
            Some(PumpDrive::InputPower(w)) if !n_override => Some(w),
            _ => None,
        };
        let mut bindings = Vec::new();
        for name in ParamName::ALL {
            if name == ParamName::NCav && input_power.is_some() {
                continue;
            }
            let d = match name {
                ParamName::OmegaC => BindingDefault {
                    mode: ModeConfig::Free,
                    init: Some(cav.omega_c),
                    lo: cav.omega_c - 5.0 * cav.kappa,
                    hi: cav.omega_c + 5.0 * cav.kappa,
                },
                ParamName::Kappa => BindingDefault {
                    mode: ModeConfig::Free,
                    init: Some(cav.kappa),
                    lo: cav.kappa / 5.0,
                    hi: cav.kappa * 5.0,
                },
                ParamName::KappaExt => BindingDefault {
                    mode: ModeConfig::Fixed,
                    init: Some(cav.kappa_ext),
                    lo: cav.kappa_ext / 5.0,
                    hi: cav.kappa_ext * 5.0,
                },
                ParamName::OmegaM => BindingDefault {
                    mode: ModeConfig::Shared,
                    init: Some(mech.omega_m),
                    lo: mech.omega_m - 50.0 * mech.gamma_m,
                    hi: mech.omega_m + 50.0 * mech.gamma_m,
                },
                ParamName::GammaM => BindingDefault {
                    mode: ModeConfig::Shared,
                    init: Some(mech.gamma_m),
                    lo: mech.gamma_m / 10.0,
                    hi: mech.gamma_m * 10.0,
                },
                ParamName::G0 => BindingDefault {
                    mode: ModeConfig::Fixed,
                    init: Some(mech.g0),
                    lo: mech.g0 / 10.0,
                    hi: mech.g0 * 10.0,
                },
                ParamName::NCav => {
                    let n = file.n_cav;
                    BindingDefault {
                        mode: ModeConfig::Fixed,
                        init: n,
                        lo: n.map_or(1.0, |n| n / 10.0),
                        hi: n.map_or(1e9, |n| n * 10.0),
                    }
                }
            };
            let over = config.fit.bindings.iter().find(|b| b.param == name);
            let mode = over.map_or(d.mode, |b| b.mode);
            let init = over
                .and_then(|b| b.init.map(|v| to_internal(name, v)))
                .or(d.init)
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "{label}: no value for {name}; add it to the file or the fit bindings"
                    ))
                })?;
            let lo = over.and_then(|b| b.lo.map(|v| to_internal(name, v))).unwrap_or(d.lo);
            let hi = over.and_then(|b| b.hi.map(|v| to_internal(name, v))).unwrap_or(d.hi);
            bindings.push(match mode {
                ModeConfig::Fixed => ParamBinding::fixed(name, init),
                ModeConfig::Free => ParamBinding::free(name, init, lo, hi),
                ModeConfig::Shared => {
                    let id = over
                        .and_then(|b| b.group.clone())
                        .unwrap_or_else(|| format!("{name}{suffix}"));
                    if !problem.shared.iter().any(|s| s.id == id) {
                        problem.shared.push(SharedBinding {
                            id: id.clone(),
                            name,
                            bounds: (lo, hi),
                            init,
                        });
                    }
                    ParamBinding::shared(name, id)
                }
            });
        }
        problem.datasets.push(FitDataset {
            label: label.clone(),
            scheme: file.scheme,
            input_power,
            points: file.fit_points(),
            bindings,
        });
    }
    Ok(problem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParam {
    pub name: ParamName,
    /// `dataset` or `shared`.
    pub scope: String,
    /// Dataset label or shared group id.
    pub id: String,
    pub value: f64,
    pub uncertainty: Option<f64>,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDataset {
    pub label: String,
    pub scheme: PumpScheme,
    pub points: usize,
    /// All seven parameters in public units.
    pub values: BTreeMap<String, f64>,
}

/// Fit results in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub converged: bool,
    pub iterations: usize,
    pub rms_residual: f64,
    pub points: usize,
    pub parameters: Vec<ReportParam>,
    pub datasets: Vec<ReportDataset>,
}

impl FitReport {
    pub fn new(problem: &FitProblem, result: &FitResult) -> Self {
        let parameters = result
            .values
            .iter()
            .map(|p| {
                let (scope, id) = match &p.scope {
                    Scope::Dataset(d) => ("dataset", problem.datasets[*d].label.clone()),
                    Scope::Shared(id) => ("shared", id.clone()),
                };
                ReportParam {
                    name: p.name,
                    scope: scope.into(),
                    id,
                    value: to_public(p.name, p.value),
                    uncertainty: Some(to_public(p.name, p.uncertainty)).filter(|u| u.is_finite()),
                    unit: if p.name.is_frequency() { "Hz" } else { "" }.into(),
                }
            })
            .collect();
        let datasets = problem
            .datasets
            .iter()
            .zip(&result.dataset_values)
            .map(|(ds, values)| ReportDataset {
                label: ds.label.clone(),
                scheme: ds.scheme,
                points: ds.points.len(),
                values: ParamName::ALL
                    .iter()
                    .map(|&n| (n.to_string(), to_public(n, values[n.index()])))
                    .collect(),
            })
            .collect();
        Self {
            converged: result.converged,
            iterations: result.iterations,
            rms_residual: result.rms_residual,
            points: result.residuals.len(),
            parameters,
            datasets,
        }
    }

    /// Value of `name` for dataset `label`, in public units.
    pub fn value(&self, label: &str, name: ParamName) -> Option<f64> {
        self.datasets
            .iter()
            .find(|d| d.label == label)
            .and_then(|d| d.values.get(name.as_str()).copied())
    }
}

pub fn residual_csv(problem: &FitProblem, result: &FitResult) -> String {
    let mut out = String::from("dataset,probe_freq_hz,pump_freq_hz,s21_mag,model_mag,residual\n");
    let mut k = 0;
    for (ds, values) in problem.datasets.iter().zip(&result.dataset_values) {
        for (p, model) in ds.points.iter().zip(model_magnitudes(ds, values)) {
            let model = model.map_or(String::new(), |m| format!("{m:e}"));
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{},{:e}\n",
                ds.label,
                rad_to_hz(p.probe_omega),
                rad_to_hz(p.pump_omega),
                p.magnitude,
                model,
                result.residuals[k]
            ));
            k += 1;
        }
    }
    out
}

/// Runs the fit and writes `fit_report.json` and `fit_residuals.csv`. A fit
/// that fails to converge still writes both files before returning
/// [`CliError::NotConverged`].
pub fn cmd_fit(config: &RunConfig, paths: &[PathBuf], out: &Path) -> Result<FitReport, CliError> {
    let mut files = Vec::new();
    for path in paths {
        let file = read_dataset(path)?;
        let label = file.label.clone().unwrap_or_else(|| {
            path.file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
        });
        files.push((label, file));
    }
    let problem = build_problem(config, &files)?;
    let settings = LmSettings {
        max_iterations: config
            .fit
            .max_iterations
            .unwrap_or(LmSettings::default().max_iterations),
        ..LmSettings::default()
    };
    let (result, failure) = match fit_with(&problem, &settings) {
        Ok(r) => (r, None),
        Err(FitError::NotConverged(best)) => {
            let err = CliError::NotConverged {
                iterations: best.iterations,
                rms: best.rms_residual,
            };
            (*best, Some(err))
        }
        Err(e) => return Err(CliError::fit(e)),
    };
    let report = FitReport::new(&problem, &result);
    ensure_dir(out)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_atomic(&out.join("fit_report.json"), json.as_bytes())?;
    write_atomic(
        &out.join("fit_residuals.csv"),
        residual_csv(&problem, &result).as_bytes(),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonReport {
    pub power_w: f64,
    pub detuning_hz: f64,
    pub n_cav: f64,
    pub cooperativity: f64,
}

/// Intracavity photons for `power_w` at the device input, pump detuned by
/// `detuning_hz` (default: the red sideband `−Ωm`).
pub fn cmd_photons(config: &RunConfig, power_w: f64, detuning_hz: Option<f64>) -> Result<PhotonReport, CliError> {
    if !(power_w.is_finite() && power_w >= 0.0) {
        return Err(CliError::Config(format!(
            "pump power must be non-negative, got {power_w} W"
        )));
    }
    let cav = config.cavity.params()?;
    let mech = config.mechanics.params()?;
    let delta = detuning_hz.map_or(-mech.omega_m, omit_core::hz_to_rad);
    let pump = PumpConfig::new(PumpScheme::Red, delta, PumpDrive::InputPower(power_w))
        .map_err(|e| CliError::model("pump", e))?;
    let n_cav = intracavity_photon_number(&pump, &cav);
    Ok(PhotonReport {
        power_w,
        detuning_hz: rad_to_hz(delta),
        n_cav,
        cooperativity: cooperativity(mech.g0, n_cav, cav.kappa, mech.gamma_m),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinewidthReport {
    pub fwhm_hz: f64,
    /// Implied by the width and the configured `Γm`.
    pub cooperativity: Option<f64>,
}

/// FWHM of the optomechanical feature. A stepped-pump file is reduced to
/// the pump step with the strongest feature.
pub fn cmd_linewidth(file: &DatasetFile, config: Option<&RunConfig>) -> Result<LinewidthReport, CliError> {
    let trace = file
        .traces()
        .into_iter()
        .max_by(|a, b| a.visibility().total_cmp(&b.visibility()))
        .ok_or_else(|| CliError::Feature("dataset has no samples".into()))?;
    let fwhm = omit_core::fit::extract_linewidth(&trace).map_err(CliError::fit)?;
    let fwhm_hz = rad_to_hz(fwhm);
    let cooperativity = config.map(|c| {
        let ratio = fwhm_hz / c.mechanics.gamma_m_hz;
        match file.scheme {
            PumpScheme::Red => ratio - 1.0,
            PumpScheme::Blue => 1.0 - ratio,
        }
    });
    Ok(LinewidthReport { fwhm_hz, cooperativity })
}

/// Prints lines to `out`, mapping failures to the write exit code.
pub(crate) fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::write(Path::new("<stdout>"), e))
}
