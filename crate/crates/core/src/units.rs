//! Physical constants and unit conversions used at the public boundary.
//!
//! Everything inside the crate works in angular frequency (rad/s); files,
//! configs and printed reports use Hz and dBm.

use std::f64::consts::TAU;

use thiserror::Error;

/// Reduced Planck constant (J·s, CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum UnitError {
    #[error("power must be positive to express in dBm, got {0} W")]
    NonPositivePower(f64),
}

/// Hz to rad/s.
#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    f * TAU
}

/// rad/s to Hz.
#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TAU
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(p_watts: f64) -> Result<f64, UnitError> {
    if !(p_watts > 0.0) || !p_watts.is_finite() {
        return Err(UnitError::NonPositivePower(p_watts));
    }
    Ok(10.0 * (p_watts * 1e3).log10())
}
