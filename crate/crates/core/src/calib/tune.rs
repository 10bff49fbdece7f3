//! Tuning of the analysis train towards an exact π/2 on the idle oscillator.

use crate::dynamics::{PulseTrainSpec, TrainPropagator};
use crate::hilbert::{make_initial_state, Spin};
use crate::sequence::SequenceSpec;
use crate::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    /// Target for `|⟨σ_z⟩|`.
    pub tol: f64,
    /// Coordinate sweeps before giving up.
    pub max_iterations: usize,
    /// Starting `(phase_step, rabi_scale)`; `None` uses the small-η estimate.
    pub start: Option<(f64, f64)>,
    /// Relative half-width of the Rabi scale bracket.
    pub scale_window: f64,
    /// Half-width of the phase-step bracket, rad.
    pub phase_window: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iterations: 20,
            start: None,
            scale_window: 0.4,
            phase_window: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainTuning {
    pub phase_step: f64,
    pub rabi_scale: f64,
    pub achieved_sigma_z: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub total_duration: f64,
}

impl TrainTuning {
    /// The analysis train with the tuned values applied.
    pub fn apply(&self, train: &PulseTrainSpec) -> PulseTrainSpec {
        let mut t = *train;
        t.phase_step = self.phase_step;
        t.drive.rabi *= self.rabi_scale;
        t
    }
}

/// Rabi scale giving a π/2 in the small-η limit: `N Ω s δt e^{−η²/2} = π/2`.
pub fn analytic_rabi_scale(train: &PulseTrainSpec) -> f64 {
    let eta = train.drive.eta;
    std::f64::consts::FRAC_PI_2
        / (train.n_flashes as f64 * train.drive.rabi * train.flash_dur * (-0.5 * eta * eta).exp())
}

struct Objective<'a> {
    spec: &'a SequenceSpec,
    ensemble: Vec<(usize, f64)>,
    evaluations: usize,
}

impl Objective<'_> {
    /// Signed thermal `⟨σ_z⟩` after the bare train on `|↓⟩`.
    fn sigma_z(&mut self, phase_step: f64, rabi_scale: f64) -> Result<f64> {
        self.evaluations += 1;
        let mut train = self.spec.analysis;
        train.phase_step = phase_step;
        train.drive.rabi *= rabi_scale;
        let prop = TrainPropagator::new(&self.spec.hilbert, &train, &self.spec.mode, &self.spec.frame)?;
        let mut sz = 0.0;
        for &(n, w) in &self.ensemble {
            let psi = make_initial_state(Spin::Down, n, &self.spec.hilbert)?;
            sz += w * prop.run_unchecked(&psi, train.base_phase)?.sigma_z();
        }
        Ok(sz)
    }
}

/// Golden-section search of `|f|` on `[lo, hi]`, returning early once
/// `|f| <= tol`. Returns `(x, |f|, f)`.
fn golden(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    seed: (f64, f64),
) -> Result<(f64, f64, f64)> {
    let mut best = (seed.0, seed.1.abs(), seed.1);
    let track = |x: f64, v: f64, best: &mut (f64, f64, f64)| {
        if v.abs() < best.1 {
            *best = (x, v.abs(), v);
        }
    };
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1)?;
    track(x1, f1, &mut best);
    if best.1 <= tol {
        return Ok(best);
    }
    let mut f2 = f(x2)?;
    track(x2, f2, &mut best);
    let scale = lo.abs().max(hi.abs()).max(1e-3);
    while best.1 > tol && (hi - lo) > 1e-13 * scale {
        if f1.abs() < f2.abs() {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1)?;
            track(x1, f1, &mut best);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2)?;
            track(x2, f2, &mut best);
        }
    }
    Ok(best)
}

/// Coordinate descent over `(phase_step, rabi_scale)` minimizing the thermal
/// `|⟨σ_z⟩|` of the bare analysis train applied to `|↓⟩`.
pub fn tune_pulse_train(spec: &SequenceSpec, options: &TuneOptions) -> Result<TrainTuning> {
    spec.analysis.validate()?;
    if !(options.tol > 0.0) {
        return Err(Error::param("tune.tol", "must be > 0"));
    }
    let mut obj = Objective {
        spec,
        ensemble: spec.thermal_ensemble()?,
        evaluations: 0,
    };
    let (mut dphi, mut scale) = options
        .start
        .unwrap_or((0.0, analytic_rabi_scale(&spec.analysis)));
    let mut sz = obj.sigma_z(dphi, scale)?;
    let mut iterations = 0;
    while sz.abs() > options.tol {
        if iterations == options.max_iterations {
            return Err(Error::SearchFailed {
                best: sz.abs(),
                tol: options.tol,
            });
        }
        iterations += 1;
        let before = sz.abs();
        let w = options.scale_window;
        let (s, _, v) = golden(
            |s| obj.sigma_z(dphi, s),
            scale * (1.0 - w),
            scale * (1.0 + w),
            options.tol,
            (scale, sz),
        )?;
        scale = s;
        sz = v;
        if sz.abs() <= options.tol {
            break;
        }
        let pw = options.phase_window;
        let (p, _, v) = golden(|p| obj.sigma_z(p, scale), dphi - pw, dphi + pw, options.tol, (dphi, sz))?;
        dphi = p;
        sz = v;
        if sz.abs() >= before * (1.0 - 1e-12) && sz.abs() > options.tol {
            return Err(Error::SearchFailed {
                best: sz.abs(),
                tol: options.tol,
            });
        }
    }
    Ok(TrainTuning {
        phase_step: dphi,
        rabi_scale: scale,
        achieved_sigma_z: sz,
        iterations,
        evaluations: obj.evaluations,
        total_duration: spec.analysis.total_duration(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DephasingSpec;
    use crate::hilbert::{DriveParams, FrameParams, HilbertSpec, ModeParams};
    use crate::sequence::{Excitation, SyncPulse, ThermalAveraging};
    use std::f64::consts::PI;

    fn spec(eta: f64, rabi: f64) -> SequenceSpec {
        let omega = 2.0 * PI * 1.3e6;
        SequenceSpec {
            hilbert: HilbertSpec::new(24, 1e-4).unwrap(),
            mode: ModeParams::new(omega, 0.15, 0.0).unwrap(),
            frame: FrameParams::default(),
            thermal: ThermalAveraging::default(),
            excitation: Excitation::None,
            sync: SyncPulse::default(),
            analysis: PulseTrainSpec {
                n_flashes: 30,
                flash_dur: 100e-9,
                cycle_dur: 2.0 * PI / omega,
                base_phase: 0.0,
                phase_step: 0.0,
                drive: DriveParams::new(rabi, 0.0, eta).unwrap(),
            },
            dephasing: DephasingSpec::none(),
        }
    }

    #[test]
    fn eta_zero_matches_analytic_scale() {
        let s = spec(0.0, 2.0 * PI * 500e3);
        let opts = TuneOptions {
            tol: 1e-9,
            start: Some((0.0, 0.8 * analytic_rabi_scale(&s.analysis))),
            ..TuneOptions::default()
        };
        let t = tune_pulse_train(&s, &opts).unwrap();
        assert!((t.rabi_scale / analytic_rabi_scale(&s.analysis) - 1.0).abs() < 1e-4);
        assert!(t.achieved_sigma_z.abs() <= 1e-9);
    }

    #[test]
    fn loose_tolerance_is_quick() {
        let s = spec(0.4, 2.0 * PI * 500e3);
        let opts = TuneOptions {
            tol: 0.5,
            start: Some((0.0, 0.5 * analytic_rabi_scale(&s.analysis))),
            ..TuneOptions::default()
        };
        let t = tune_pulse_train(&s, &opts).unwrap();
        assert!(t.iterations <= 2);
        assert!(t.achieved_sigma_z.abs() <= 0.5);
    }

    #[test]
    fn unreachable_target_fails() {
        let s = spec(0.4, 2.0 * PI * 500e3);
        let opts = TuneOptions {
            tol: 1e-300,
            max_iterations: 2,
            ..TuneOptions::default()
        };
        assert!(matches!(tune_pulse_train(&s, &opts), Err(Error::SearchFailed { .. })));
    }
}
