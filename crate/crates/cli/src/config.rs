//! JSON run configuration. All frequencies are in Hz; conversion to rad/s
//! happens here and nowhere else.

use std::fs;
use std::path::Path;

use omit_core::fit::ParamName;
use omit_core::{dbm_to_watts, hz_to_rad, CavityParams, MechanicalParams, PumpConfig, PumpDrive, PumpScheme};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cavity: CavityConfig,
    pub mechanics: MechanicsConfig,
    #[serde(default)]
    pub pumps: Vec<PumpEntry>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub display: DisplayConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub fc_hz: f64,
    pub kappa_hz: f64,
    pub kappa_ext_hz: f64,
}

impl CavityConfig {
    pub fn params(&self) -> Result<CavityParams, CliError> {
        CavityParams::from_hz(self.fc_hz, self.kappa_hz, self.kappa_ext_hz).map_err(|e| CliError::model("cavity", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsConfig {
    pub fm_hz: f64,
    pub gamma_m_hz: f64,
    pub g0_hz: f64,
}

impl MechanicsConfig {
    pub fn params(&self) -> Result<MechanicalParams, CliError> {
        MechanicalParams::from_hz(self.fm_hz, self.gamma_m_hz, self.g0_hz).map_err(|e| CliError::model("mechanics", e))
    }
}

/// One pump condition. `cavity` and `mechanics` override the top-level
/// values for this condition only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpEntry {
    #[serde(default)]
    pub label: Option<String>,
    pub scheme: PumpScheme,
    /// Pump detuning `Δ = ωd − ωc`; defaults to the sideband `∓Ωm`.
    #[serde(default)]
    pub detuning_hz: Option<f64>,
    #[serde(default)]
    pub n_cav: Option<f64>,
    #[serde(default)]
    pub power_dbm: Option<f64>,
    #[serde(default)]
    pub temperature_mk: Option<f64>,
    #[serde(default)]
    pub probe_power_dbm: Option<f64>,
    #[serde(default)]
    pub cavity: Option<CavityConfig>,
    #[serde(default)]
    pub mechanics: Option<MechanicsConfig>,
}

impl PumpEntry {
    pub fn drive(&self) -> Result<PumpDrive, String> {
        match (self.n_cav, self.power_dbm) {
            (Some(n), None) => Ok(PumpDrive::PhotonNumber(n)),
            (None, Some(p)) => Ok(PumpDrive::InputPower(dbm_to_watts(p))),
            (None, None) => Err("pump needs one of n_cav or power_dbm".into()),
            (Some(_), Some(_)) => Err("pump sets both n_cav and power_dbm; give only one".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub line_points: usize,
    /// Half width of probe windows in units of `Γeff`.
    pub half_width_gamma_eff: f64,
    pub map_rows: usize,
    pub map_columns: usize,
    /// Half span of the map detuning axis in units of `κ`.
    pub detuning_span_kappa: f64,
    pub protocol: ProtocolConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            line_points: 801,
            half_width_gamma_eff: 25.0,
            map_rows: 201,
            map_columns: 401,
            detuning_span_kappa: 2.0,
            protocol: ProtocolConfig::default(),
        }
    }
}

/// Stepped-pump acquisition used by `simulate --protocol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub pump_steps: usize,
    pub points_per_sweep: usize,
    pub half_width_gamma_eff: f64,
    pub detuning_span_kappa: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            pump_steps: 41,
            points_per_sweep: 801,
            half_width_gamma_eff: 25.0,
            detuning_span_kappa: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Overrides of the default bindings, applied to every dataset.
    pub bindings: Vec<BindingConfig>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeConfig {
    Fixed,
    Free,
    Shared,
}

/// Values are in Hz, except `n_cav`. A fixed binding uses `init` as its
/// value. A shared binding without `group` is shared per temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingConfig {
    pub param: ParamName,
    pub mode: ModeConfig,
    #[serde(default)]
    pub group: Option<String>,
    #[serde(default)]
    pub init: Option<f64>,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisplayConfig {
    /// Subtracted from absolute probe frequencies on plots; defaults to `fc`.
    pub offset_hz: Option<f64>,
}

/// A pump condition with all units resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub pump: PumpConfig,
    pub cavity: CavityParams,
    pub mechanics: MechanicalParams,
    pub temperature_mk: Option<f64>,
    pub probe_power_dbm: Option<f64>,
}

/// Public value of a parameter: Hz for frequencies, unchanged otherwise.
pub fn to_public(name: ParamName, internal: f64) -> f64 {
    if name.is_frequency() {
        omit_core::rad_to_hz(internal)
    } else {
        internal
    }
}

pub fn to_internal(name: ParamName, public: f64) -> f64 {
    if name.is_frequency() {
        hz_to_rad(public)
    } else {
        public
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.cavity.params()?;
        self.mechanics.params()?;
        for (i, _) in self.pumps.iter().enumerate() {
            self.condition(i)?;
        }
        let g = &self.grid;
        let p = &g.protocol;
        if g.line_points < 2 || g.map_rows < 2 || g.map_columns < 2 || p.points_per_sweep < 2 || p.pump_steps == 0 {
            return Err(CliError::Config("grids need at least 2 points and 1 pump step".into()));
        }
        for (what, v) in [
            ("half_width_gamma_eff", g.half_width_gamma_eff),
            ("detuning_span_kappa", g.detuning_span_kappa),
            ("protocol.half_width_gamma_eff", p.half_width_gamma_eff),
            ("protocol.detuning_span_kappa", p.detuning_span_kappa),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("grid.{what} must be positive, got {v}")));
            }
        }
        if let Some(noise) = &self.noise {
            if !(noise.sigma.is_finite() && noise.sigma >= 0.0) {
                return Err(CliError::Config(format!(
                    "noise.sigma must be non-negative, got {}",
                    noise.sigma
                )));
            }
        }
        for b in &self.fit.bindings {
            if let (Some(lo), Some(hi)) = (b.lo, b.hi) {
                if !(lo < hi) {
                    return Err(CliError::Config(format!(
                        "binding {}: lo {lo} must be below hi {hi}",
                        b.param
                    )));
                }
            }
            if b.mode == ModeConfig::Fixed && (b.lo.is_some() || b.hi.is_some()) {
                return Err(CliError::Config(format!(
                    "binding {}: a fixed binding takes no bounds",
                    b.param
                )));
            }
            if b.mode != ModeConfig::Shared && b.group.is_some() {
                return Err(CliError::Config(format!(
                    "binding {}: group only applies to shared mode",
                    b.param
                )));
            }
        }
        Ok(())
    }

    /// Resolves pump `i` against the top-level cavity and mechanics.
    pub fn condition(&self, i: usize) -> Result<Condition, CliError> {
        let entry = self
            .pumps
            .get(i)
            .ok_or_else(|| CliError::Config(format!("no pump #{i}")))?;
        resolve(entry, i, &self.cavity, &self.mechanics)
    }

    pub fn conditions(&self) -> Result<Vec<Condition>, CliError> {
        (0..self.pumps.len()).map(|i| self.condition(i)).collect()
    }
}

pub fn resolve(
    entry: &PumpEntry,
    index: usize,
    cavity: &CavityConfig,
    mechanics: &MechanicsConfig,
) -> Result<Condition, CliError> {
    let label = entry.label.clone().unwrap_or_else(|| match entry.temperature_mk {
        Some(t) => format!("{}_{t}mK_{index:02}", entry.scheme),
        None => format!("{}_{index:02}", entry.scheme),
    });
    let context = format!("pump '{label}'");
    let cavity = entry.cavity.unwrap_or(*cavity).params()?;
    let mechanics = entry.mechanics.unwrap_or(*mechanics).params()?;
    let drive = entry.drive().map_err(|e| CliError::Config(format!("{context}: {e}")))?;
    let delta = entry
        .detuning_hz
        .map(hz_to_rad)
        .unwrap_or_else(|| entry.scheme.optimal_detuning(mechanics.omega_m));
    let pump = PumpConfig::new(entry.scheme, delta, drive).map_err(|e| CliError::model(&context, e))?;
    Ok(Condition {
        label: sanitize(&label),
        pump,
        cavity,
        mechanics,
        temperature_mk: entry.temperature_mk,
        probe_power_dbm: entry.probe_power_dbm,
    })
}

/// Keeps labels usable as file names.
fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "cavity": {"fc_hz": 6e9, "kappa_hz": 84e3, "kappa_ext_hz": 44e3},
        "mechanics": {"fm_hz": 3.8e6, "gamma_m_hz": 15.3, "g0_hz": 0.56},
        "pumps": [{"scheme": "red", "n_cav": 1.3e6, "temperature_mk": 250}]
    }"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.grid, GridConfig::default());
        let cond = c.condition(0).unwrap();
        assert_eq!(cond.label, "red_250mK_00");
        assert_eq!(cond.pump.delta, -cond.mechanics.omega_m);
        assert_eq!(cond.pump.drive, PumpDrive::PhotonNumber(1.3e6));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"g0_hz\"", "\"g_0\": 1, \"g0_hz\"");
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("\"pumps\"", "\"grids\": {}, \"pumps\"");
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn pump_drive_must_be_unique() {
        let both = MINIMAL.replace("\"n_cav\": 1.3e6", "\"n_cav\": 1.3e6, \"power_dbm\": -40");
        assert!(RunConfig::from_json(&both).is_err());
        let neither = MINIMAL.replace("\"n_cav\": 1.3e6,", "");
        assert!(RunConfig::from_json(&neither).is_err());
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        let bad = MINIMAL.replace("\"kappa_ext_hz\": 44e3", "\"kappa_ext_hz\": 144e3");
        assert_eq!(RunConfig::from_json(&bad).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn labels_are_file_safe() {
        assert_eq!(sanitize("red 250/mK"), "red_250_mK");
    }
}
