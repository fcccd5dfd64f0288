//! Steady-state probe response of a microwave cavity coupled to a mechanical
//! resonator under a strong pump.
//!
//! With `Ω = ωp − ωd` the probe offset from the pump and `Δ = ωd − ωc` the
//! pump detuning, the cavity and mechanical susceptibilities are
//!
//! ```text
//! χc(Ω) = 1 / (κ/2 − i(Ω + Δ))
//! χm(Ω) = 1 / (Γm/2 − i(Ω ∓ Ωm))      (− red, + blue)
//! ```
//!
//! and the probe transmission is
//!
//! ```text
//! S21(Ω) = 1 − (κext/2) χc / (1 ± g0² n_cav χc χm)     (+ red, − blue)
//! ```
//!
//! All frequencies are angular (rad/s).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::HBAR;

/// Smallest accepted `|1 ± g0² n χc χm|` before the response is declared singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("singular probe response at Ω = {omega} rad/s ({kind})")]
    SingularDenominator { omega: f64, kind: Singularity },
}

/// Why the probe response has no finite steady-state value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Singularity {
    /// `|1 ± g0² n χc χm|` fell below [`SINGULARITY_THRESHOLD`].
    VanishingDenominator { magnitude: f64 },
    /// The coupled response has a pole in the upper half plane: the pump
    /// drives the mechanics past the parametric instability and no
    /// steady state exists.
    UnstablePole { growth_rate: f64 },
}

impl std::fmt::Display for Singularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Singularity::VanishingDenominator { magnitude } => {
                write!(f, "|denominator| = {magnitude:e}")
            }
            Singularity::UnstablePole { growth_rate } => {
                write!(f, "unstable pole, growth rate {growth_rate:e} s^-1")
            }
        }
    }
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), ModelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value, reason })
    }
}

/// Cavity resonance and linewidths, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub omega_c: f64,
    pub kappa: f64,
    pub kappa_ext: f64,
}

impl CavityParams {
    pub fn new(omega_c: f64, kappa: f64, kappa_ext: f64) -> Result<Self, ModelError> {
        let p = Self {
            omega_c,
            kappa,
            kappa_ext,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_hz(f_c: f64, kappa: f64, kappa_ext: f64) -> Result<Self, ModelError> {
        use crate::units::hz_to_rad;
        Self::new(hz_to_rad(f_c), hz_to_rad(kappa), hz_to_rad(kappa_ext))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check("omega_c", self.omega_c, self.omega_c > 0.0, "must be positive")?;
        check("kappa", self.kappa, self.kappa > 0.0, "must be positive")?;
        check(
            "kappa_ext",
            self.kappa_ext,
            self.kappa_ext > 0.0 && self.kappa_ext <= self.kappa,
            "must satisfy 0 < kappa_ext <= kappa",
        )
    }
}

/// Mechanical resonance, intrinsic linewidth and vacuum coupling, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanicalParams {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub g0: f64,
}

impl MechanicalParams {
    pub fn new(omega_m: f64, gamma_m: f64, g0: f64) -> Result<Self, ModelError> {
        let p = Self { omega_m, gamma_m, g0 };
        p.validate()?;
        Ok(p)
    }

    pub fn from_hz(f_m: f64, gamma_m: f64, g0: f64) -> Result<Self, ModelError> {
        use crate::units::hz_to_rad;
        Self::new(hz_to_rad(f_m), hz_to_rad(gamma_m), hz_to_rad(g0))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check("omega_m", self.omega_m, self.omega_m > 0.0, "must be positive")?;
        check("gamma_m", self.gamma_m, self.gamma_m > 0.0, "must be positive")?;
        check("g0", self.g0, self.g0 >= 0.0, "must be non-negative")
    }

    /// Resolved-sideband regime, `Ωm > κ`.
    pub fn sideband_resolved(&self, cav: &CavityParams) -> bool {
        self.omega_m > cav.kappa
    }
}

/// Which mechanical sideband the pump addresses.
///
/// Red pumping (`ωd ≈ ωc − Ωm`) gives transparency and broadens the
/// mechanics; blue pumping (`ωd ≈ ωc + Ωm`) gives absorption and narrows it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpScheme {
    Red,
    Blue,
}

impl PumpScheme {
    /// Sign `s` with `Ω = s·Ωm` at the mechanical feature: +1 red, −1 blue.
    pub fn sideband_sign(self) -> f64 {
        match self {
            PumpScheme::Red => 1.0,
            PumpScheme::Blue => -1.0,
        }
    }

    /// Pump detuning that puts the probe sideband on the cavity resonance.
    pub fn optimal_detuning(self, omega_m: f64) -> f64 {
        -self.sideband_sign() * omega_m
    }

    /// Probe offset at the mechanical feature.
    pub fn feature_offset(self, omega_m: f64) -> f64 {
        self.sideband_sign() * omega_m
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PumpScheme::Red => "red",
            PumpScheme::Blue => "blue",
        }
    }
}

impl std::fmt::Display for PumpScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PumpScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "red" => Ok(PumpScheme::Red),
            "blue" => Ok(PumpScheme::Blue),
            other => Err(format!("unknown pump scheme '{other}' (expected red or blue)")),
        }
    }
}

/// Pump strength. Only one of power and photon number is authoritative;
/// the other follows from [`intracavity_photon_number`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpDrive {
    /// Pump power at the device input, watts.
    InputPower(f64),
    /// Intracavity pump photon number.
    PhotonNumber(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    pub scheme: PumpScheme,
    /// `Δ = ωd − ωc`, rad/s.
    pub delta: f64,
    pub drive: PumpDrive,
}

impl PumpConfig {
    pub fn new(scheme: PumpScheme, delta: f64, drive: PumpDrive) -> Result<Self, ModelError> {
        let p = Self { scheme, delta, drive };
        p.validate()?;
        Ok(p)
    }

    /// Pump on the optimal sideband, `Δ = ∓Ωm`.
    pub fn on_sideband(scheme: PumpScheme, omega_m: f64, drive: PumpDrive) -> Result<Self, ModelError> {
        Self::new(scheme, scheme.optimal_detuning(omega_m), drive)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        check("delta", self.delta, true, "must be finite")?;
        match self.drive {
            PumpDrive::InputPower(p) => check("p_in", p, p >= 0.0, "must be non-negative"),
            PumpDrive::PhotonNumber(n) => check("n_cav", n, n >= 0.0, "must be non-negative"),
        }
    }

    /// Absolute pump frequency `ωd = ωc + Δ`.
    pub fn pump_omega(&self, cav: &CavityParams) -> f64 {
        cav.omega_c + self.delta
    }

    pub fn photon_number(&self, cav: &CavityParams) -> f64 {
        intracavity_photon_number(self, cav)
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }
}

/// `χc = 1 / (κ/2 − i(Ω + Δ))`, units 1/(rad/s).
pub fn cavity_susceptibility(omega: f64, delta: f64, kappa: f64) -> Complex64 {
    Complex64::new(0.5 * kappa, -(omega + delta)).inv()
}

/// `χm = 1 / (Γm/2 − i(Ω ∓ Ωm))`, `−` for red and `+` for blue pumping.
pub fn mechanical_susceptibility(omega: f64, mech: &MechanicalParams, scheme: PumpScheme) -> Complex64 {
    let detuning = omega - scheme.feature_offset(mech.omega_m);
    Complex64::new(0.5 * mech.gamma_m, -detuning).inv()
}

/// Intracavity pump photon number `n = P κext |χc(ωd)|² / (2ħωd)`, with
/// `χc(ωd) = 1/(κ/2 − iΔ)`.
pub fn intracavity_photon_number(pump: &PumpConfig, cav: &CavityParams) -> f64 {
    match pump.drive {
        PumpDrive::PhotonNumber(n) => n,
        PumpDrive::InputPower(p_in) => {
            let chi_sq = cavity_susceptibility(0.0, pump.delta, cav.kappa).norm_sqr();
            p_in * cav.kappa_ext * chi_sq / (2.0 * HBAR * pump.pump_omega(cav))
        }
    }
}

/// Inverse of [`intracavity_photon_number`]: input power (W) that stores `n_cav` photons.
pub fn input_power_for_photons(n_cav: f64, delta: f64, cav: &CavityParams) -> f64 {
    let chi_sq = cavity_susceptibility(0.0, delta, cav.kappa).norm_sqr();
    n_cav * 2.0 * HBAR * (cav.omega_c + delta) / (cav.kappa_ext * chi_sq)
}

/// `C = 4 g0² n_cav / (κ Γm)`.
pub fn cooperativity(g0: f64, n_cav: f64, kappa: f64, gamma_m: f64) -> f64 {
    4.0 * g0 * g0 * n_cav / (kappa * gamma_m)
}

/// Backaction-modified mechanical linewidth on the optimal sideband:
/// `Γm(1 + C)` red, `Γm(1 − C)` blue. A non-positive blue value marks the
/// parametric instability.
pub fn effective_linewidth(mech: &MechanicalParams, cooperativity: f64, scheme: PumpScheme) -> f64 {
    match scheme {
        PumpScheme::Red => mech.gamma_m * (1.0 + cooperativity),
        PumpScheme::Blue => mech.gamma_m * (1.0 - cooperativity),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

/// Red pumping is always stable; blue pumping is unstable once `C ≥ 1`.
pub fn instability_check(_mech: &MechanicalParams, cooperativity: f64, scheme: PumpScheme) -> Stability {
    match scheme {
        PumpScheme::Blue if cooperativity >= 1.0 => Stability::Unstable,
        _ => Stability::Stable,
    }
}

/// Probe response for one fixed pump, ready to evaluate at many probe offsets.
///
/// Construction resolves the photon number and verifies that the coupled
/// response has no pole in the upper half plane.
#[derive(Debug, Clone, Copy)]
pub struct ProbeResponse {
    scheme: PumpScheme,
    delta: f64,
    half_kappa: f64,
    half_kappa_ext: f64,
    half_gamma: f64,
    feature_offset: f64,
    /// `± g0² n_cav` with the sign of the denominator.
    coupling: f64,
    n_cav: f64,
}

impl ProbeResponse {
    pub fn new(pump: &PumpConfig, cav: &CavityParams, mech: &MechanicalParams) -> Result<Self, ModelError> {
        cav.validate()?;
        mech.validate()?;
        pump.validate()?;
        let n_cav = intracavity_photon_number(pump, cav);
        let g_sq = mech.g0 * mech.g0 * n_cav;
        let response = Self {
            scheme: pump.scheme,
            delta: pump.delta,
            half_kappa: 0.5 * cav.kappa,
            half_kappa_ext: 0.5 * cav.kappa_ext,
            half_gamma: 0.5 * mech.gamma_m,
            feature_offset: pump.scheme.feature_offset(mech.omega_m),
            coupling: match pump.scheme {
                PumpScheme::Red => g_sq,
                PumpScheme::Blue => -g_sq,
            },
            n_cav,
        };
        let growth = response.max_growth_rate();
        if growth >= 0.0 {
            return Err(ModelError::SingularDenominator {
                omega: response.feature_offset,
                kind: Singularity::UnstablePole { growth_rate: growth },
            });
        }
        Ok(response)
    }

    pub fn n_cav(&self) -> f64 {
        self.n_cav
    }

    pub fn scheme(&self) -> PumpScheme {
        self.scheme
    }

    /// Largest real part of the poles of the coupled response in `z = −iΩ`.
    ///
    /// The poles solve `(z + A)(z + B) + c = 0` with `A = κ/2 − iΔ`,
    /// `B = Γm/2 − i·offset` and `c = ±g0² n_cav`.
    fn max_growth_rate(&self) -> f64 {
        let a = Complex64::new(self.half_kappa, -self.delta);
        let b = Complex64::new(self.half_gamma, self.feature_offset);
        let disc = ((a - b) * (a - b) - 4.0 * self.coupling).sqrt();
        let r1 = 0.5 * (-(a + b) + disc);
        let r2 = 0.5 * (-(a + b) - disc);
        r1.re.max(r2.re)
    }

    /// Complex `S21` at probe offset `Ω`.
    pub fn transmission(&self, omega: f64) -> Result<Complex64, ModelError> {
        let chi_c = Complex64::new(self.half_kappa, -(omega + self.delta)).inv();
        let chi_m = Complex64::new(self.half_gamma, -(omega - self.feature_offset)).inv();
        let denom = 1.0 + self.coupling * chi_c * chi_m;
        let magnitude = denom.norm();
        if !(magnitude >= SINGULARITY_THRESHOLD) {
            return Err(ModelError::SingularDenominator {
                omega,
                kind: Singularity::VanishingDenominator { magnitude },
            });
        }
        Ok(1.0 - chi_c * self.half_kappa_ext / denom)
    }
}

/// Complex probe transmission `S21` at probe offset `Ω`.
pub fn probe_transmission(
    omega: f64,
    pump: &PumpConfig,
    cav: &CavityParams,
    mech: &MechanicalParams,
) -> Result<Complex64, ModelError> {
    ProbeResponse::new(pump, cav, mech)?.transmission(omega)
}

/// Bare notch response `1 − (κext/2) χc` without optomechanical coupling.
pub fn bare_transmission(omega: f64, delta: f64, cav: &CavityParams) -> Complex64 {
    1.0 - cavity_susceptibility(omega, delta, cav.kappa) * (0.5 * cav.kappa_ext)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::hz_to_rad;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const COOP_RED: f64 = 1.268_845_315_904_139_4;
    const COOP_BLUE: f64 = 0.335_850_066_934_404_3;

    fn cav(kappa_khz: f64) -> CavityParams {
        CavityParams::from_hz(6e9, kappa_khz * 1e3, 44e3).unwrap()
    }

    fn mech() -> MechanicalParams {
        MechanicalParams::from_hz(3.8e6, 15.3, 0.56).unwrap()
    }

    #[test]
    fn cavity_susceptibility_on_resonance() {
        let kappa = hz_to_rad(100e3);
        let chi = cavity_susceptibility(1.0e6, -1.0e6, kappa);
        assert_eq!(chi.im, 0.0);
        assert_relative_eq!(chi.re, 2.0 / kappa, max_relative = 1e-15);
        assert_relative_eq!(chi.re, 1.0 / (std::f64::consts::PI * 1e5), max_relative = 1e-15);
    }

    #[test]
    fn cavity_susceptibility_half_linewidth() {
        let kappa = hz_to_rad(100e3);
        let chi = cavity_susceptibility(0.5 * kappa, 0.0, kappa);
        assert_relative_eq!(chi.re, 1.0 / kappa, max_relative = 1e-14);
        assert_relative_eq!(chi.im, 1.0 / kappa, max_relative = 1e-14);
        assert_relative_eq!(chi.norm(), 2.0 / (kappa * 2f64.sqrt()), max_relative = 1e-14);
    }

    #[test]
    fn mechanical_susceptibility_peaks() {
        let m = mech();
        let red = mechanical_susceptibility(m.omega_m, &m, PumpScheme::Red);
        let blue = mechanical_susceptibility(-m.omega_m, &m, PumpScheme::Blue);
        for chi in [red, blue] {
            assert_eq!(chi.im, 0.0);
            assert_relative_eq!(chi.re, 2.0 / m.gamma_m, max_relative = 1e-15);
        }
        let half = mechanical_susceptibility(m.omega_m + 0.5 * m.gamma_m, &m, PumpScheme::Red);
        assert_relative_eq!(half.norm_sqr(), 0.5 * red.norm_sqr(), max_relative = 1e-9);
    }

    #[test]
    fn photon_number_zero_power() {
        let pump = PumpConfig::on_sideband(PumpScheme::Red, mech().omega_m, PumpDrive::InputPower(0.0)).unwrap();
        assert_eq!(intracavity_photon_number(&pump, &cav(100.0)), 0.0);
    }

    #[test]
    fn photon_number_calibration_power() {
        // P_in from an independent 40-digit evaluation of n = P κext |χc|² / (2ħωd).
        let p_in = 2.130_468_195_686_982_4e-8;
        let pump = PumpConfig::on_sideband(PumpScheme::Red, mech().omega_m, PumpDrive::InputPower(p_in)).unwrap();
        let n = intracavity_photon_number(&pump, &cav(100.0));
        assert_relative_eq!(n, 1.3e6, max_relative = 1e-12);
        assert_relative_eq!(
            input_power_for_photons(1.3e6, pump.delta, &cav(100.0)),
            p_in,
            max_relative = 1e-12
        );

        // on resonance the same power stores 1 + (2Ωm/κ)² = 5777 times more photons,
        // up to the ωd factor in the denominator
        let on_res = pump.with_delta(0.0);
        let c = cav(100.0);
        let ratio = intracavity_photon_number(&on_res, &c) / n;
        let expected = 5777.0 * (c.omega_c + pump.delta) / c.omega_c;
        assert_relative_eq!(ratio, expected, max_relative = 1e-12);
    }

    #[test]
    fn cooperativity_nominal_values() {
        let m = mech();
        assert_eq!(cooperativity(m.g0, 0.0, cav(84.0).kappa, m.gamma_m), 0.0);
        assert_relative_eq!(
            cooperativity(m.g0, 1.3e6, cav(84.0).kappa, m.gamma_m),
            COOP_RED,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            cooperativity(m.g0, 3.4e5, cav(83.0).kappa, m.gamma_m),
            COOP_BLUE,
            max_relative = 1e-12
        );
    }

    #[test]
    fn effective_linewidth_closed_form() {
        let m = mech();
        assert_eq!(effective_linewidth(&m, 0.0, PumpScheme::Red), m.gamma_m);
        assert_relative_eq!(
            effective_linewidth(&m, COOP_RED, PumpScheme::Red),
            hz_to_rad(34.713_333_333_333_33),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            effective_linewidth(&m, COOP_BLUE, PumpScheme::Blue),
            hz_to_rad(10.161_493_975_903_61),
            max_relative = 1e-12
        );
        assert!(effective_linewidth(&m, 1.5, PumpScheme::Blue) < 0.0);
    }

    #[test]
    fn instability_threshold() {
        let m = mech();
        assert_eq!(instability_check(&m, 10.0, PumpScheme::Red), Stability::Stable);
        assert_eq!(instability_check(&m, COOP_BLUE, PumpScheme::Blue), Stability::Stable);
        assert_eq!(instability_check(&m, 1.01, PumpScheme::Blue), Stability::Unstable);
        assert_eq!(instability_check(&m, 1.0, PumpScheme::Blue), Stability::Unstable);
    }

    #[test]
    fn bare_notch_depth() {
        let c = cav(100.0);
        let pump = PumpConfig::new(PumpScheme::Red, 0.0, PumpDrive::PhotonNumber(0.0)).unwrap();
        let s = probe_transmission(0.0, &pump, &c, &mech()).unwrap();
        assert_eq!(s.im, 0.0);
        assert_relative_eq!(s.re, 0.56, max_relative = 1e-12);
    }

    #[test]
    fn omit_peak_value() {
        let m = mech();
        let pump = PumpConfig::on_sideband(PumpScheme::Red, m.omega_m, PumpDrive::PhotonNumber(1.3e6)).unwrap();
        let s = probe_transmission(m.omega_m, &pump, &cav(84.0), &m).unwrap();
        assert_relative_eq!(s.norm(), 0.769_129_468_572_526, max_relative = 1e-12);
    }

    #[test]
    fn omia_dip_value() {
        let m = mech();
        let pump = PumpConfig::on_sideband(PumpScheme::Blue, m.omega_m, PumpDrive::PhotonNumber(3.4e5)).unwrap();
        let s = probe_transmission(-m.omega_m, &pump, &cav(83.0), &m).unwrap();
        assert_relative_eq!(s.norm(), 0.201_806_014_673_869_2, max_relative = 1e-11);
    }

    fn blue_at(c: f64) -> Result<Complex64, ModelError> {
        let m = mech();
        let k = cav(83.0);
        let n = c * k.kappa * m.gamma_m / (4.0 * m.g0 * m.g0);
        let pump = PumpConfig::on_sideband(PumpScheme::Blue, m.omega_m, PumpDrive::PhotonNumber(n)).unwrap();
        probe_transmission(-m.omega_m, &pump, &k, &m)
    }

    #[test]
    fn blue_beyond_threshold_is_singular() {
        assert!(blue_at(0.99).is_ok());
        let err = blue_at(1.01).unwrap_err();
        assert!(matches!(
            err,
            ModelError::SingularDenominator {
                kind: Singularity::UnstablePole { .. },
                ..
            }
        ));
    }

    #[test]
    fn red_never_unstable() {
        let m = mech();
        for n in [1e6, 1e9, 1e12] {
            for delta_khz in [-500.0, -100.0, 0.0, 100.0] {
                let pump = PumpConfig::new(
                    PumpScheme::Red,
                    -m.omega_m + hz_to_rad(delta_khz * 1e3),
                    PumpDrive::PhotonNumber(n),
                )
                .unwrap();
                assert!(ProbeResponse::new(&pump, &cav(84.0), &m).is_ok());
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(CavityParams::new(1.0, 1.0, 2.0).is_err());
        assert!(CavityParams::new(1.0, 0.0, 0.0).is_err());
        assert!(MechanicalParams::new(1.0, 0.0, 0.0).is_err());
        assert!(MechanicalParams::new(1.0, 1.0, -1.0).is_err());
        assert!(PumpConfig::new(PumpScheme::Red, 0.0, PumpDrive::PhotonNumber(-1.0)).is_err());
        assert!(PumpConfig::new(PumpScheme::Red, f64::NAN, PumpDrive::PhotonNumber(1.0)).is_err());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("Red".parse::<PumpScheme>().unwrap(), PumpScheme::Red);
        assert_eq!(" blue ".parse::<PumpScheme>().unwrap(), PumpScheme::Blue);
        assert!("green".parse::<PumpScheme>().is_err());
    }

    proptest! {
        #[test]
        fn bare_reduction_exact(omega in -1e8f64..1e8, delta in -1e8f64..1e8, kappa_khz in 10.0f64..500.0) {
            let c = CavityParams::from_hz(6e9, kappa_khz * 1e3, 0.4 * kappa_khz * 1e3).unwrap();
            for scheme in [PumpScheme::Red, PumpScheme::Blue] {
                let pump = PumpConfig::new(scheme, delta, PumpDrive::PhotonNumber(0.0)).unwrap();
                let s = probe_transmission(omega, &pump, &c, &mech()).unwrap();
                prop_assert_eq!(s, bare_transmission(omega, delta, &c));
            }
        }

        #[test]
        fn cavity_conjugate_symmetry(x in -1e7f64..1e7, kappa in 1e3f64..1e7) {
            let plus = cavity_susceptibility(x, 0.0, kappa);
            let minus = cavity_susceptibility(-x, 0.0, kappa);
            prop_assert_eq!(plus, minus.conj());
            prop_assert!(plus.norm() <= 2.0 / kappa * (1.0 + 1e-15));
        }

        #[test]
        fn photon_number_linear_in_power(p in 0.0f64..1e-6, alpha in 0.0f64..1e3, delta in -1e8f64..1e8) {
            let c = cav(100.0);
            let n1 = PumpConfig::new(PumpScheme::Red, delta, PumpDrive::InputPower(p)).unwrap().photon_number(&c);
            let n2 = PumpConfig::new(PumpScheme::Red, delta, PumpDrive::InputPower(alpha * p)).unwrap().photon_number(&c);
            prop_assert!((n2 - alpha * n1).abs() <= 1e-12 * (alpha * n1).max(1e-300));
        }

        #[test]
        fn on_resonance_closed_forms(n in 0.0f64..3.5e5, kappa_khz in 60.0f64..120.0) {
            let m = mech();
            let c = cav(kappa_khz);
            let coop = cooperativity(m.g0, n, c.kappa, m.gamma_m);
            let eta = c.kappa_ext / c.kappa;
            let red = PumpConfig::on_sideband(PumpScheme::Red, m.omega_m, PumpDrive::PhotonNumber(n)).unwrap();
            let s = probe_transmission(m.omega_m, &red, &c, &m).unwrap().norm();
            let want = 1.0 - eta / (1.0 + coop);
            prop_assert!((s - want).abs() <= 1e-10 * want);
            prop_assume!(coop < 0.95);
            let blue = PumpConfig::on_sideband(PumpScheme::Blue, m.omega_m, PumpDrive::PhotonNumber(n)).unwrap();
            let s = probe_transmission(-m.omega_m, &blue, &c, &m).unwrap().norm();
            let want = (1.0 - eta / (1.0 - coop)).abs();
            prop_assert!((s - want).abs() <= 1e-10 * want.max(1e-3));
        }
    }
}
