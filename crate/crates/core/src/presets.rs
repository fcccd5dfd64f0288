//! Parameter sets of the measured device: 6 GHz quarter-wave cavity coupled
//! to a 3.8 MHz silicon nitride string, at 250, 350 and 450 mK.

use crate::model::{CavityParams, MechanicalParams, PumpScheme};
use crate::units::hz_to_rad;

pub const CAVITY_FREQ_HZ: f64 = 6e9;
pub const KAPPA_HZ: f64 = 100e3;
pub const KAPPA_EXT_HZ: f64 = 44e3;
pub const G0_HZ: f64 = 0.56;
pub const MECH_FREQ_HZ: f64 = 3.8e6;

/// Highest red-pumping photon number.
pub const N_CAV_RED_MAX: f64 = 1.3e6;
/// Highest blue-pumping photon number below the instability.
pub const N_CAV_BLUE_MAX: f64 = 3.4e5;

/// Mechanical parameters at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature {
    pub millikelvin: f64,
    pub gamma_m_hz: f64,
    /// Shift of the mechanical frequency relative to 250 mK.
    pub omega_m_offset_hz: f64,
}

pub const TEMPERATURES: [Temperature; 3] = [
    Temperature {
        millikelvin: 250.0,
        gamma_m_hz: 15.3,
        omega_m_offset_hz: 0.0,
    },
    Temperature {
        millikelvin: 350.0,
        gamma_m_hz: 20.0,
        omega_m_offset_hz: 7.0,
    },
    Temperature {
        millikelvin: 450.0,
        gamma_m_hz: 26.8,
        omega_m_offset_hz: 12.0,
    },
];

impl Temperature {
    pub fn mechanics(&self) -> MechanicalParams {
        MechanicalParams::from_hz(MECH_FREQ_HZ + self.omega_m_offset_hz, self.gamma_m_hz, G0_HZ)
            .expect("preset mechanics are valid")
    }
}

/// One panel of a `(Δ, Ω)` map measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCondition {
    pub scheme: PumpScheme,
    pub temperature_mk: f64,
    pub probe_power_dbm: f64,
    pub kappa_hz: f64,
    /// Cavity frequency shift relative to the first panel of the same scheme.
    pub cavity_shift_hz: f64,
    pub n_cav: f64,
}

const fn cond(scheme: PumpScheme, t: f64, p: f64, k_khz: f64, shift_khz: f64, n_cav: f64) -> MapCondition {
    MapCondition {
        scheme,
        temperature_mk: t,
        probe_power_dbm: p,
        kappa_hz: k_khz * 1e3,
        cavity_shift_hz: shift_khz * 1e3,
        n_cav,
    }
}

pub const RED_MAPS: [MapCondition; 5] = [
    cond(PumpScheme::Red, 250.0, -116.0, 84.0, 0.0, N_CAV_RED_MAX),
    cond(PumpScheme::Red, 350.0, -116.0, 82.0, 52.0, N_CAV_RED_MAX),
    cond(PumpScheme::Red, 450.0, -116.0, 83.0, 93.0, N_CAV_RED_MAX),
    cond(PumpScheme::Red, 250.0, -96.0, 96.0, -10.0, N_CAV_RED_MAX),
    cond(PumpScheme::Red, 250.0, -86.0, 95.0, -9.0, N_CAV_RED_MAX),
];

pub const BLUE_MAPS: [MapCondition; 5] = [
    cond(PumpScheme::Blue, 250.0, -116.0, 83.0, 0.0, N_CAV_BLUE_MAX),
    cond(PumpScheme::Blue, 350.0, -116.0, 80.0, 37.0, N_CAV_BLUE_MAX),
    cond(PumpScheme::Blue, 450.0, -116.0, 78.0, 80.0, N_CAV_BLUE_MAX),
    cond(PumpScheme::Blue, 250.0, -96.0, 103.0, -17.0, N_CAV_BLUE_MAX),
    cond(PumpScheme::Blue, 250.0, -86.0, 98.0, -19.0, N_CAV_BLUE_MAX),
];

impl MapCondition {
    pub fn cavity(&self) -> CavityParams {
        CavityParams::from_hz(CAVITY_FREQ_HZ + self.cavity_shift_hz, self.kappa_hz, KAPPA_EXT_HZ)
            .expect("preset cavity is valid")
    }

    pub fn temperature(&self) -> Temperature {
        TEMPERATURES
            .iter()
            .copied()
            .find(|t| t.millikelvin == self.temperature_mk)
            .expect("preset temperature")
    }

    pub fn mechanics(&self) -> MechanicalParams {
        self.temperature().mechanics()
    }
}

/// Nominal cavity with the design linewidth.
pub fn nominal_cavity() -> CavityParams {
    CavityParams::new(hz_to_rad(CAVITY_FREQ_HZ), hz_to_rad(KAPPA_HZ), hz_to_rad(KAPPA_EXT_HZ))
        .expect("preset cavity is valid")
}
