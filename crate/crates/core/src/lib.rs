//! Probe transmission of a pumped microwave optomechanical cavity:
//! transparency (red pump) and absorption (blue pump) lineshapes, synthetic
//! two-tone sweeps, and joint least-squares extraction of cavity and
//! mechanical parameters.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fit;
pub mod model;
pub mod presets;
pub mod sweep;
pub mod units;

pub use model::{
    bare_transmission, cavity_susceptibility, cooperativity, effective_linewidth, input_power_for_photons,
    instability_check, intracavity_photon_number, mechanical_susceptibility, probe_transmission, CavityParams,
    MechanicalParams, ModelError, ProbeResponse, PumpConfig, PumpDrive, PumpScheme, Singularity, Stability,
};
pub use sweep::{
    add_noise, emulate_protocol, simulate_line_cut, simulate_map, AxisKind, NoiseSpec, ProtocolRun, ProtocolSettings,
    Samples, SweepError, SweepMap, SweepTrace, TraceMeta,
};
pub use units::{dbm_to_watts, hz_to_rad, rad_to_hz, watts_to_dbm, HBAR};
