//! Calibration: fringe fits, pattern fits, train tuning and decode tables.

mod decode;
mod fit;
mod interp;
mod pattern;
mod tune;

pub use decode::{
    build_decode_tables, decode_observables, decode_relative, decode_trace, decode_with_reference,
    noise_floor_estimate, unwrap_phases, DecodeTables, Decoded, NoiseFloor, CLAMP_MARGIN, MIN_NOISE_REPEATS,
};
pub use fit::{
    bootstrap_cosine, circular_span, fit_cosine, wrap_phase, BootstrapSpread, CosineFit,
    FitSample, MAX_ITERATIONS, MIN_POINTS, MIN_SPAN, STEP_TOL,
};
pub use interp::Pchip;
pub use pattern::{
    bootstrap_pattern, fit_wave_pattern, fit_wave_pattern_from, PatternBootstrap, PatternFit,
    MIN_PATTERN_POINTS,
};
pub use tune::{analytic_rabi_scale, tune_pulse_train, TrainTuning, TuneOptions};

use std::f64::consts::FRAC_PI_2;

use crate::{Error, Result};

/// Default fitted angle of the pattern wave vector to the trap z axis, rad.
pub const DEFAULT_PATTERN_ROTATION: f64 = 0.840;

/// `η = (2π/λ) cos(angle) · sqrt(ħ / (2 m ω))`.
///
/// `projection_angle` is the angle between the pattern wave vector and the
/// mode direction, `|angle| <= π/2`.
pub fn derive_lamb_dicke(
    mass: f64,
    freq: f64,
    eff_wavelength: f64,
    projection_angle: f64,
    hbar: f64,
) -> Result<f64> {
    for (name, v) in [
        ("mass", mass),
        ("freq", freq),
        ("eff_wavelength", eff_wavelength),
        ("hbar", hbar),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("{v} must be > 0")));
        }
    }
    if !(projection_angle.abs() <= FRAC_PI_2) {
        return Err(Error::param(
            "projection_angle",
            format!("|{projection_angle}| exceeds pi/2"),
        ));
    }
    let x_zpf = (hbar / (2.0 * mass * freq)).sqrt();
    let c = if projection_angle.abs() == FRAC_PI_2 {
        0.0
    } else {
        projection_angle.cos()
    };
    Ok(2.0 * std::f64::consts::PI / eff_wavelength * c * x_zpf)
}

/// Lamb-Dicke parameter of a mode tilted by `mode_angle` from z, given the
/// value `eta_z` quoted for a mode along z and the pattern rotation.
pub fn effective_eta(eta_z: f64, pattern_rotation: f64, mode_angle: f64) -> Result<f64> {
    let c = pattern_rotation.cos();
    if c.abs() < 1e-12 {
        return Err(Error::param("pattern_rotation", "wave vector perpendicular to z"));
    }
    Ok(eta_z * (pattern_rotation - mode_angle).cos() / c)
}
