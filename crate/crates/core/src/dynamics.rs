//! Time evolution in the drive's rotating frame (RWA already applied).
//!
//! During a flash the ion evolves under
//! `H = ω_m a†a + δ σ_z/2 + (Ω/2)(e^{iφ} C σ₊ + e^{−iφ} C† σ₋)` (ħ = 1, rad/s).
//! Between flashes only the motional term acts.
//!
//! The drive phase enters through `H(φ) = U H(0) U†` with
//! `U = exp(iφσ_z/2)`, and `U` commutes with the free evolution, so one
//! eigendecomposition per (drive, duration) serves every phase.

use nalgebra::DVector;

use crate::hilbert::{
    check_truncation, coupling_operator, DriveParams, FrameParams, HilbertSpec, ModeParams,
    SpinMotionState,
};
use crate::linalg::{expm_hermitian, hermitize};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Stroboscopic train: `n_flashes` square flashes of `flash_dur`, one per
/// `cycle_dur`, flash `k` driven at phase `base_phase + k·phase_step`.
///
/// `drive.phase` is ignored inside a train; the per-flash law replaces it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTrainSpec {
    pub n_flashes: usize,
    pub flash_dur: f64,
    pub cycle_dur: f64,
    pub base_phase: f64,
    pub phase_step: f64,
    pub drive: DriveParams,
}

impl PulseTrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_flashes < 1 {
            return Err(Error::param("train.n_flashes", "must be >= 1"));
        }
        if !(self.flash_dur > 0.0 && self.flash_dur <= self.cycle_dur) {
            return Err(Error::param(
                "train.flash_dur",
                format!(
                    "need 0 < flash_dur ({}) <= cycle_dur ({})",
                    self.flash_dur, self.cycle_dur
                ),
            ));
        }
        Ok(())
    }

    /// Wall-clock duration `n_flashes · cycle_dur`.
    pub fn total_duration(&self) -> f64 {
        self.n_flashes as f64 * self.cycle_dur
    }

    pub fn flash_phase(&self, k: usize) -> f64 {
        self.base_phase + k as f64 * self.phase_step
    }

    pub fn with_base_phase(mut self, phase: f64) -> Self {
        self.base_phase = phase;
        self
    }
}

/// Exact free motional evolution: Fock amplitude `n` picks up `e^{−i n ω t}`.
pub fn free_evolve(state: &SpinMotionState, mode: &ModeParams, t: f64) -> Result<SpinMotionState> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("{t} must be >= 0")));
    }
    let mut out = state.clone();
    apply_free_phases(&mut out, &free_phases(state.fock_dim(), mode.freq, t));
    Ok(out)
}

fn free_phases(fock_dim: usize, freq: f64, t: f64) -> Vec<Complex64> {
    (0..fock_dim)
        .map(|n| Complex64::from_polar(1.0, -(n as f64) * freq * t))
        .collect()
}

fn apply_free_phases(state: &mut SpinMotionState, phases: &[Complex64]) {
    let n = phases.len();
    let amps = state.amplitudes_mut();
    for (i, a) in amps.iter_mut().enumerate() {
        *a *= phases[i % n];
    }
}

/// Flash Hamiltonian at drive phase 0.
pub fn flash_hamiltonian(
    spec: &HilbertSpec,
    rabi: f64,
    eta: f64,
    mode: &ModeParams,
    frame: &FrameParams,
) -> Result<CMatrix> {
    let n = spec.fock_dim();
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        let motion = mode.freq * k as f64;
        h[(k, k)] = Complex64::new(motion - 0.5 * frame.detuning, 0.0);
        h[(n + k, n + k)] = Complex64::new(motion + 0.5 * frame.detuning, 0.0);
    }
    if rabi != 0.0 {
        let c = coupling_operator(eta, spec)? * Complex64::new(0.5 * rabi, 0.0);
        // σ₊ = |↑⟩⟨↓| fills the (↑, ↓) block
        h.view_mut((n, 0), (n, n)).copy_from(&c);
        h.view_mut((0, n), (n, n)).copy_from(&c.adjoint());
    }
    Ok(hermitize(&h))
}

/// Cached `exp(−i H(0) dt)`, applicable at any drive phase.
#[derive(Debug, Clone)]
pub struct FlashPropagator {
    spec: HilbertSpec,
    dt: f64,
    matrix: CMatrix,
}

impl FlashPropagator {
    pub fn new(
        spec: &HilbertSpec,
        rabi: f64,
        eta: f64,
        mode: &ModeParams,
        frame: &FrameParams,
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("{dt} must be > 0")));
        }
        let h = flash_hamiltonian(spec, rabi, eta, mode, frame)?;
        Ok(Self {
            spec: *spec,
            dt,
            matrix: expm_hermitian(&h, dt),
        })
    }

    pub fn duration(&self) -> f64 {
        self.dt
    }

    /// Phase-0 propagator.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// The propagator at drive phase `phase` as a full matrix.
    pub fn matrix_at(&self, phase: f64) -> CMatrix {
        let n = self.spec.fock_dim();
        let mut m = self.matrix.clone();
        let up = Complex64::from_polar(1.0, phase);
        let down = up.conj();
        for j in 0..n {
            for i in 0..n {
                m[(n + i, j)] *= up;
                m[(i, n + j)] *= down;
            }
        }
        m
    }

    /// Applies the flash at drive phase `phase`.
    pub fn apply(&self, state: &SpinMotionState, phase: f64) -> Result<SpinMotionState> {
        let n = self.spec.fock_dim();
        if state.dim() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: state.dim(),
            });
        }
        let up = Complex64::from_polar(1.0, phase);
        let down = up.conj();
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let psi_d = state.down_block();
        let psi_u = state.up_block();
        let m = &self.matrix;

        let mut out = CVector::zeros(2 * n);
        {
            let mut out_d = out.rows_mut(0, n);
            out_d.gemv(one, &m.view((0, 0), (n, n)), &psi_d, zero);
            out_d.gemv(down, &m.view((0, n), (n, n)), &psi_u, one);
        }
        {
            let mut out_u = out.rows_mut(n, n);
            out_u.gemv(up, &m.view((n, 0), (n, n)), &psi_d, zero);
            out_u.gemv(one, &m.view((n, n), (n, n)), &psi_u, one);
        }
        SpinMotionState::from_amplitudes(out, &self.spec)
    }
}

/// One flash under `drive` for `dt`, including motional evolution.
pub fn flash_evolve(
    state: &SpinMotionState,
    drive: &DriveParams,
    mode: &ModeParams,
    frame: &FrameParams,
    dt: f64,
    spec: &HilbertSpec,
) -> Result<SpinMotionState> {
    let prop = FlashPropagator::new(spec, drive.rabi, drive.eta, mode, frame, dt)?;
    let out = prop.apply(state, drive.phase)?;
    check_truncation(&out, spec).into_result()?;
    Ok(out)
}

/// Ideal instantaneous spin rotation by `angle` about the equatorial axis
/// set by `phase`: `exp(−i angle/2 (e^{iφ}σ₊ + e^{−iφ}σ₋))`.
pub fn mw_rotation(state: &SpinMotionState, angle: f64, phase: f64) -> SpinMotionState {
    let n = state.fock_dim();
    let c = Complex64::new((0.5 * angle).cos(), 0.0);
    let s = Complex64::new(0.0, -(0.5 * angle).sin());
    let e_up = Complex64::from_polar(1.0, phase);
    let e_down = e_up.conj();
    let amps = state.amplitudes();
    let out = DVector::from_fn(2 * n, |i, _| {
        if i < n {
            c * amps[i] + s * e_down * amps[n + i]
        } else {
            let k = i - n;
            s * e_up * amps[k] + c * amps[i]
        }
    });
    let mut next = state.clone();
    *next.amplitudes_mut() = out;
    next
}

/// Finite-duration MW rotation: an `eta = 0` flash of length `angle / rabi`
/// during which the motion keeps evolving.
pub fn mw_rotation_finite(
    state: &SpinMotionState,
    angle: f64,
    phase: f64,
    rabi: f64,
    mode: &ModeParams,
    frame: &FrameParams,
    spec: &HilbertSpec,
) -> Result<SpinMotionState> {
    if !(rabi > 0.0) {
        return Err(Error::param("mw.rabi", "finite MW pulse needs rabi > 0"));
    }
    let drive = DriveParams::new(rabi, phase, 0.0)?;
    flash_evolve(state, &drive, mode, frame, angle / rabi, spec)
}

/// Precomputed pieces of a stroboscopic train.
#[derive(Debug, Clone)]
pub struct TrainPropagator {
    spec: HilbertSpec,
    train: PulseTrainSpec,
    flash: FlashPropagator,
    gap_phases: Vec<Complex64>,
}

impl TrainPropagator {
    pub fn new(
        spec: &HilbertSpec,
        train: &PulseTrainSpec,
        mode: &ModeParams,
        frame: &FrameParams,
    ) -> Result<Self> {
        train.validate()?;
        let flash = FlashPropagator::new(
            spec,
            train.drive.rabi,
            train.drive.eta,
            mode,
            frame,
            train.flash_dur,
        )?;
        let gap = train.cycle_dur - train.flash_dur;
        Ok(Self {
            spec: *spec,
            train: *train,
            flash,
            gap_phases: free_phases(spec.fock_dim(), mode.freq, gap),
        })
    }

    pub fn train(&self) -> &PulseTrainSpec {
        &self.train
    }

    pub fn flash(&self) -> &FlashPropagator {
        &self.flash
    }

    /// Runs the train with base phase `base_phase`.
    pub fn run(&self, state: &SpinMotionState, base_phase: f64) -> Result<SpinMotionState> {
        let psi = self.run_unchecked(state, base_phase)?;
        check_truncation(&psi, &self.spec).into_result()?;
        Ok(psi)
    }

    /// As [`TrainPropagator::run`] without the final truncation check.
    pub fn run_unchecked(&self, state: &SpinMotionState, base_phase: f64) -> Result<SpinMotionState> {
        let mut psi = state.clone();
        for k in 0..self.train.n_flashes {
            let phase = base_phase + k as f64 * self.train.phase_step;
            psi = self.flash.apply(&psi, phase)?;
            apply_free_phases(&mut psi, &self.gap_phases);
        }
        Ok(psi)
    }
}

/// Alternates flashes and free gaps for the whole train.
pub fn run_pulse_train(
    state: &SpinMotionState,
    train: &PulseTrainSpec,
    mode: &ModeParams,
    frame: &FrameParams,
    spec: &HilbertSpec,
) -> Result<SpinMotionState> {
    TrainPropagator::new(spec, train, mode, frame)?.run(state, train.base_phase)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackActionResult {
    pub n_initial: f64,
    pub n_final: f64,
    pub delta_n: f64,
}

impl BackActionResult {
    pub fn from_means(n_initial: f64, n_final: f64) -> Self {
        Self {
            n_initial,
            n_final,
            delta_n: n_final - n_initial,
        }
    }
}

pub fn back_action(initial: &SpinMotionState, final_state: &SpinMotionState) -> Result<BackActionResult> {
    if initial.dim() != final_state.dim() {
        return Err(Error::DimensionMismatch {
            expected: initial.dim(),
            got: final_state.dim(),
        });
    }
    Ok(BackActionResult::from_means(
        initial.mean_n(),
        final_state.mean_n(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Envelope {
    Gaussian,
    Exponential,
    #[default]
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingSpec {
    pub tau: f64,
    pub envelope: Envelope,
}

impl DephasingSpec {
    pub fn new(tau: f64, envelope: Envelope) -> Result<Self> {
        if envelope != Envelope::None && !(tau > 0.0) {
            return Err(Error::param("dephasing.tau", format!("{tau} must be > 0")));
        }
        Ok(Self { tau, envelope })
    }

    pub fn none() -> Self {
        Self {
            tau: f64::INFINITY,
            envelope: Envelope::None,
        }
    }

    /// Multiplicative contrast factor after `elapsed` seconds.
    pub fn factor(&self, elapsed: f64) -> f64 {
        match self.envelope {
            Envelope::Gaussian => (-(elapsed / self.tau).powi(2)).exp(),
            Envelope::Exponential => (-elapsed / self.tau).exp(),
            Envelope::None => 1.0,
        }
    }
}

pub fn apply_dephasing(contrast: f64, spec: &DephasingSpec, elapsed: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&contrast) {
        return Err(Error::param("contrast", format!("{contrast} not in [0, 1]")));
    }
    Ok(contrast * spec.factor(elapsed))
}
