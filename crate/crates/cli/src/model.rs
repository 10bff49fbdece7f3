//! Translation of a [`RunConfig`] into simulator objects.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ionstrobe_core::calib::{derive_lamb_dicke, effective_eta, tune_pulse_train, TrainTuning, TuneOptions};
use ionstrobe_core::dynamics::{DephasingSpec, Envelope, PulseTrainSpec};
use ionstrobe_core::hilbert::{
    CoherentAmp, DriveParams, FrameParams, HilbertSpec, ModeParams, SqueezeParam, UnitScale, AMU,
};
use ionstrobe_core::sequence::{Excitation, OuterVar, SequenceSpec, SyncPulse, ThermalAveraging};
use ionstrobe_core::Error;

use crate::config::{EnvelopeKind, OuterKind, RunConfig};
use crate::output::parse_table;
use crate::CliError;

/// Columns written by `calibrate-train` and read back through `train.tuning_file`.
pub const TUNING_COLUMNS: [&str; 6] = [
    "phase_step_rad",
    "rabi_scale",
    "achieved_sigma_z",
    "total_duration_us",
    "iterations",
    "evaluations",
];

#[derive(Debug, Clone)]
pub struct Model {
    pub spec: SequenceSpec,
    pub units: UnitScale,
    pub eta: f64,
    /// Tuning applied to the analysis train, if any.
    pub tuning: Option<TrainTuning>,
}

fn invalid(e: Error) -> CliError {
    match e {
        Error::InvalidParameter { name, reason } => CliError::config(name, &reason),
        other => CliError::Numerical(other),
    }
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, &format!("{v} must be > 0")))
    }
}

pub fn outer_var(kind: OuterKind) -> OuterVar {
    match kind {
        OuterKind::AlphaPhase => OuterVar::AlphaPhase,
        OuterKind::AlphaAbs => OuterVar::AlphaAbs,
        OuterKind::ZetaPhase => OuterVar::ZetaPhase,
        OuterKind::ZetaAbs => OuterVar::ZetaAbs,
        OuterKind::None => OuterVar::None,
    }
}

/// Header name of the outer column.
pub fn outer_column(kind: OuterKind) -> &'static str {
    match kind {
        OuterKind::AlphaPhase => "theta0_rad",
        OuterKind::AlphaAbs => "alpha_abs",
        OuterKind::ZetaPhase => "zeta0_rad",
        OuterKind::ZetaAbs => "zeta_abs",
        OuterKind::None => "outer",
    }
}

pub fn excitation(cfg: &RunConfig) -> Result<Excitation, CliError> {
    let s = &cfg.state;
    let coherent = s.alpha_abs.is_some() || s.alpha_phase_rad.is_some();
    let squeezed = s.zeta_abs.is_some() || s.zeta_phase_rad.is_some();
    match (coherent, squeezed) {
        (true, true) => Err(CliError::config(
            "state",
            "alpha_* and zeta_* keys are mutually exclusive",
        )),
        (true, false) => Ok(Excitation::Coherent(
            CoherentAmp::new(s.alpha_abs.unwrap_or(0.0), s.alpha_phase_rad.unwrap_or(0.0))
                .map_err(|e| relabel(e, "state.alpha_abs"))?,
        )),
        (false, true) => Ok(Excitation::Squeeze(
            SqueezeParam::new(s.zeta_abs.unwrap_or(0.0), s.zeta_phase_rad.unwrap_or(0.0))
                .map_err(|e| relabel(e, "state.zeta_abs"))?,
        )),
        (false, false) => Ok(Excitation::None),
    }
}

fn relabel(e: Error, key: &str) -> CliError {
    match e {
        Error::InvalidParameter { reason, .. } => CliError::config(key, &reason),
        other => CliError::Numerical(other),
    }
}

impl Model {
    /// Builds the sequence; `force_cycles` overrides the train cycle length
    /// in motional periods.
    pub fn build(cfg: &RunConfig, base_dir: &Path, force_cycles: Option<f64>) -> Result<Self, CliError> {
        let hilbert = HilbertSpec::new(cfg.hilbert.fock_dim, cfg.hilbert.tail_tol)
            .map_err(|e| relabel(e, "hilbert.fock_dim"))?;
        let omega = 2.0 * PI * positive("mode.freq_hz", cfg.mode.freq_hz)?;
        let mode_angle = cfg.mode.mode_angle_deg.to_radians();
        let mode = ModeParams::new(omega, cfg.mode.n_th, mode_angle).map_err(invalid)?;
        let mass = positive("units.mass_amu", cfg.units.mass_amu)? * AMU;
        let hbar = positive("units.hbar_j_s", cfg.units.hbar_j_s)?;
        let units = UnitScale::new(hbar, mass, omega).map_err(invalid)?;

        let d = &cfg.drive;
        let eta = match (&d.derive_from_geometry, d.eta) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "drive.eta",
                    "eta and derive_from_geometry are mutually exclusive",
                ))
            }
            (Some(g), None) => derive_lamb_dicke(
                mass,
                omega,
                positive("drive.derive_from_geometry.wavelength_nm", g.wavelength_nm)? * 1e-9,
                g.rotation_rad - mode_angle,
                hbar,
            )
            .map_err(|e| relabel(e, "drive.derive_from_geometry"))?,
            (None, eta) => effective_eta(eta.unwrap_or(crate::config::DEFAULT_ETA), d.pattern_rotation_rad, mode_angle)
                .map_err(|e| relabel(e, "drive.pattern_rotation_rad"))?,
        };
        if eta < 0.0 {
            return Err(CliError::config("drive.eta", "effective value is negative"));
        }

        let t = &cfg.train;
        let cycle = match (t.cycle_ns, t.cycles_per_flash, force_cycles) {
            (_, _, Some(n)) => n * 2.0 * PI / omega,
            (Some(_), Some(_), None) => {
                return Err(CliError::config(
                    "train.cycle_ns",
                    "cycle_ns and cycles_per_flash are mutually exclusive",
                ))
            }
            (Some(ns), None, None) => positive("train.cycle_ns", ns)? * 1e-9,
            (None, n, None) => positive("train.cycles_per_flash", n.unwrap_or(1.0))? * 2.0 * PI / omega,
        };
        if t.auto_tune && t.tuning_file.is_some() {
            return Err(CliError::config(
                "train.auto_tune",
                "auto_tune and tuning_file are mutually exclusive",
            ));
        }
        let rabi = 2.0 * PI * d.rabi_hz;
        let analysis = PulseTrainSpec {
            n_flashes: t.n_flashes,
            flash_dur: positive("train.flash_ns", t.flash_ns)? * 1e-9,
            cycle_dur: cycle,
            base_phase: t.base_phase_rad,
            phase_step: 0.0,
            drive: DriveParams::new(rabi, 0.0, eta).map_err(|e| relabel(e, "drive.rabi_hz"))?,
        };
        analysis.validate().map_err(|e| relabel(e, "train"))?;

        let envelope = match cfg.dephasing.envelope {
            EnvelopeKind::Gaussian => Envelope::Gaussian,
            EnvelopeKind::Exponential => Envelope::Exponential,
            EnvelopeKind::None => Envelope::None,
        };
        let dephasing = if envelope == Envelope::None {
            DephasingSpec::none()
        } else {
            DephasingSpec::new(positive("dephasing.tau_us", cfg.dephasing.tau_us)? * 1e-6, envelope)
                .map_err(invalid)?
        };
        let thermal = match cfg.mode.thermal_samples {
            0 => ThermalAveraging::default(),
            samples => ThermalAveraging::Sampled {
                samples,
                seed: cfg.mode.thermal_seed,
            },
        };
        let sync = SyncPulse {
            phase: cfg.sync.phase_rad,
            finite_rabi: match cfg.sync.mw_rabi_hz {
                Some(f) => Some(2.0 * PI * positive("sync.mw_rabi_hz", f)?),
                None => None,
            },
        };
        let mut spec = SequenceSpec {
            hilbert,
            mode,
            frame: FrameParams {
                detuning: 2.0 * PI * d.detuning_hz,
                ..FrameParams::default()
            },
            thermal,
            excitation: excitation(cfg)?,
            sync,
            analysis,
            dephasing,
        };

        let tuning = if t.auto_tune {
            let opts = TuneOptions {
                tol: positive("train.tune_tol", t.tune_tol)?,
                ..TuneOptions::default()
            };
            Some(tune_pulse_train(&spec.with_excitation(Excitation::None), &opts)?)
        } else if let Some(file) = &t.tuning_file {
            Some(read_tuning(&resolve(base_dir, file), &spec.analysis)?)
        } else {
            None
        };
        spec.analysis = match &tuning {
            Some(tu) => tu.apply(&spec.analysis),
            None => {
                let mut a = spec.analysis;
                a.phase_step = t.dphi_rad;
                a.drive.rabi *= positive("train.rabi_scale", t.rabi_scale)?;
                a
            }
        };
        spec.validate().map_err(CliError::Numerical)?;
        Ok(Self {
            spec,
            units,
            eta,
            tuning,
        })
    }

    /// Phase step and Rabi scale actually applied.
    pub fn train_settings(&self, cfg: &RunConfig) -> (f64, f64) {
        match &self.tuning {
            Some(t) => (t.phase_step, t.rabi_scale),
            None => (cfg.train.dphi_rad, cfg.train.rabi_scale),
        }
    }
}

pub fn resolve(base: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_tuning(path: &Path, train: &PulseTrainSpec) -> Result<TrainTuning, CliError> {
    let key = "train.tuning_file";
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(key, &format!("cannot read {}: {e}", path.display())))?;
    let (header, rows) = parse_table(&text)
        .ok_or_else(|| CliError::config(key, &format!("{} is not a table", path.display())))?;
    if header != TUNING_COLUMNS || rows.len() != 1 {
        return Err(CliError::config(
            key,
            &format!("{} is not a calibrate-train output", path.display()),
        ));
    }
    let r = &rows[0];
    Ok(TrainTuning {
        phase_step: r[0],
        rabi_scale: r[1],
        achieved_sigma_z: r[2],
        iterations: r[4] as usize,
        evaluations: r[5] as usize,
        total_duration: train.total_duration(),
    })
}
