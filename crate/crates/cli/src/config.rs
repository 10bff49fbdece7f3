//! Run configuration: a strict TOML schema with unit-suffixed keys.
//!
//! Every section has defaults, so an empty file is a valid configuration.
//! Unknown keys are rejected at parse time.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub hilbert: HilbertSection,
    pub mode: ModeSection,
    pub units: UnitsSection,
    pub drive: DriveSection,
    pub sync: SyncSection,
    pub train: TrainSection,
    pub state: StateSection,
    pub dephasing: DephasingSection,
    pub scan: ScanSection,
    pub detection: DetectionSection,
    pub tables: TablesSection,
    pub trace: TraceSection,
    pub squeeze: SqueezeSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HilbertSection {
    pub fock_dim: usize,
    pub tail_tol: f64,
}

impl Default for HilbertSection {
    fn default() -> Self {
        Self {
            fock_dim: 128,
            tail_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeSection {
    pub freq_hz: f64,
    pub n_th: f64,
    pub mode_angle_deg: f64,
    /// 0 averages the thermal state exactly; otherwise Monte-Carlo draws.
    pub thermal_samples: usize,
    pub thermal_seed: u64,
}

impl Default for ModeSection {
    fn default() -> Self {
        Self {
            freq_hz: 1.3e6,
            n_th: 0.15,
            mode_angle_deg: 0.0,
            thermal_samples: 0,
            thermal_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnitsSection {
    pub mass_amu: f64,
    pub hbar_j_s: f64,
}

impl Default for UnitsSection {
    fn default() -> Self {
        Self {
            mass_amu: ionstrobe_core::hilbert::ION_MASS_AMU,
            hbar_j_s: ionstrobe_core::hilbert::HBAR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub wavelength_nm: f64,
    /// Angle of the pattern wave vector to z.
    pub rotation_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    pub rabi_hz: f64,
    /// Lamb-Dicke parameter for a mode along z; default 0.40.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub pattern_rotation_rad: f64,
    pub detuning_hz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derive_from_geometry: Option<Geometry>,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            rabi_hz: 0.3e6,
            eta: None,
            pattern_rotation_rad: ionstrobe_core::calib::DEFAULT_PATTERN_ROTATION,
            detuning_hz: 0.0,
            derive_from_geometry: None,
        }
    }
}

pub const DEFAULT_ETA: f64 = 0.40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncSection {
    pub phase_rad: f64,
    /// Finite microwave Rabi frequency; absent means an ideal pulse.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mw_rabi_hz: Option<f64>,
}

impl Default for SyncSection {
    fn default() -> Self {
        Self {
            phase_rad: ionstrobe_core::sequence::DEFAULT_SYNC_PHASE,
            mw_rabi_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub n_flashes: usize,
    pub flash_ns: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_ns: Option<f64>,
    /// Cycle length in motional periods; default 1 when `cycle_ns` is absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles_per_flash: Option<f64>,
    pub dphi_rad: f64,
    pub rabi_scale: f64,
    pub base_phase_rad: f64,
    /// Run the tuner before the command; supersedes dphi_rad and rabi_scale.
    pub auto_tune: bool,
    pub tune_tol: f64,
    /// Output of `calibrate-train`; supersedes dphi_rad and rabi_scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning_file: Option<String>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            n_flashes: 30,
            flash_ns: 100.0,
            cycle_ns: None,
            cycles_per_flash: None,
            dphi_rad: 0.0,
            rabi_scale: 1.0,
            base_phase_rad: 0.0,
            auto_tune: false,
            tune_tol: 1e-3,
            tuning_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_phase_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_phase_rad: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Gaussian,
    Exponential,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DephasingSection {
    pub tau_us: f64,
    pub envelope: EnvelopeKind,
}

impl Default for DephasingSection {
    fn default() -> Self {
        Self {
            tau_us: 70.0,
            envelope: EnvelopeKind::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterKind {
    AlphaPhase,
    AlphaAbs,
    ZetaPhase,
    ZetaAbs,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    pub phi_start_rad: f64,
    pub phi_stop_rad: f64,
    pub phi_num: usize,
    /// Include `phi_stop_rad` in the grid.
    pub phi_endpoint: bool,
    pub outer_var: OuterKind,
    /// Explicit outer grid, in the unit of the outer variable.
    pub outer_values: Vec<f64>,
    pub interleave_reference: bool,
    /// Evenly spaced outer grid, used when `outer_values` is empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_range: Option<Range>,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            phi_start_rad: -PI,
            phi_stop_rad: PI,
            phi_num: 24,
            phi_endpoint: false,
            outer_var: OuterKind::None,
            outer_values: Vec::new(),
            interleave_reference: false,
            outer_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub num: usize,
    #[serde(default)]
    pub endpoint: bool,
}

impl Range {
    pub fn values(&self, key: &str) -> Result<Vec<f64>, CliError> {
        linspace(self.start, self.stop, self.num, self.endpoint, key)
    }
}

pub fn linspace(start: f64, stop: f64, num: usize, endpoint: bool, key: &str) -> Result<Vec<f64>, CliError> {
    if num == 0 || (endpoint && num < 2) {
        return Err(CliError::config(key, "needs more grid points"));
    }
    if !(start.is_finite() && stop.is_finite()) {
        return Err(CliError::config(key, "grid bounds must be finite"));
    }
    let div = if endpoint { num - 1 } else { num } as f64;
    let step = (stop - start) / div;
    Ok((0..num).map(|k| start + step * k as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    Analytic,
    Shots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub mode: DetectionMode,
    pub shots: usize,
    pub base_seed: u64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self {
            mode: DetectionMode::Analytic,
            shots: 500,
            base_seed: 0,
        }
    }
}

impl DetectionSection {
    pub fn shots(&self) -> Option<usize> {
        match self.mode {
            DetectionMode::Analytic => None,
            DetectionMode::Shots => Some(self.shots),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TablesSection {
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub phi_num: usize,
    /// Previously built tables to load instead of building.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// Directory of tables keyed by configuration hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<String>,
}

impl Default for TablesSection {
    fn default() -> Self {
        Self {
            alpha_max: 7.0,
            alpha_step: 0.5,
            phi_num: 12,
            file: None,
            cache_dir: None,
        }
    }
}

impl TablesSection {
    pub fn alpha_grid(&self) -> Result<Vec<f64>, CliError> {
        if !(self.alpha_step > 0.0 && self.alpha_max >= self.alpha_step) {
            return Err(CliError::config(
                "tables.alpha_step",
                "needs 0 < alpha_step <= alpha_max",
            ));
        }
        let n = (self.alpha_max / self.alpha_step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| k as f64 * self.alpha_step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSection {
    /// ϑ0 points over [0, 2π).
    pub theta_num: usize,
    /// α = 0 noise-floor repeats; 0 skips the estimate.
    pub noise_repeats: usize,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            theta_num: 16,
            noise_repeats: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SqueezeSection {
    /// Keep every n-th outer value in the back-action table.
    pub backaction_stride: usize,
    /// Bootstrap replicas per contrast fit in shot mode; 0 skips.
    pub bootstrap_replicas: usize,
}

impl Default for SqueezeSection {
    fn default() -> Self {
        Self {
            backaction_stride: 2,
            bootstrap_replicas: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternSection {
    pub wavelength_nm: f64,
    pub rotation_rad: f64,
    pub phase_origin_rad: f64,
    pub contrast: f64,
    pub half_extent_nm: f64,
    pub grid_num: usize,
    pub bootstrap_replicas: usize,
}

impl Default for PatternSection {
    fn default() -> Self {
        Self {
            wavelength_nm: 138.0,
            rotation_rad: 0.840,
            phase_origin_rad: 0.0,
            contrast: 0.76,
            half_extent_nm: 200.0,
            grid_num: 26,
            bootstrap_replicas: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityRow {
    pub label: String,
    #[serde(default)]
    pub white_sigma_rad: f64,
    #[serde(default)]
    pub rw_sigma_rad_per_sqrt_s: f64,
    #[serde(default)]
    pub drift_rate_rad_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub sample_interval_s: f64,
    pub duration_s: f64,
    pub windows_s: Vec<f64>,
    /// Also report statistics after reference correction at this interval.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_interval_s: Option<f64>,
    /// Write each simulated trace next to the output.
    pub write_traces: bool,
    pub rows: Vec<StabilityRow>,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            sample_interval_s: 0.1,
            duration_s: 6000.0,
            windows_s: vec![2.0, 40.0, 200.0],
            reference_interval_s: None,
            write_traces: false,
            rows: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The effective configuration as TOML, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
