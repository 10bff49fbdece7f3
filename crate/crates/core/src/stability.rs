//! Classical phase-noise traces and windowed stability statistics.
//!
//! Everything is in radians; [`to_degrees`] exists for reporting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseNoiseModel {
    /// rad per sample.
    pub white_sigma: f64,
    /// rad/√s.
    pub rw_sigma: f64,
    /// rad/s.
    pub drift_rate: f64,
    /// s.
    pub sample_interval: f64,
}

impl PhaseNoiseModel {
    pub fn new(white_sigma: f64, rw_sigma: f64, drift_rate: f64, sample_interval: f64) -> Result<Self> {
        for (name, v) in [
            ("stability.white_sigma", white_sigma),
            ("stability.rw_sigma", rw_sigma),
            ("stability.drift_rate", drift_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be >= 0")));
            }
        }
        if !(sample_interval > 0.0) {
            return Err(Error::param("stability.sample_interval", "must be > 0"));
        }
        Ok(Self {
            white_sigma,
            rw_sigma,
            drift_rate,
            sample_interval,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrace {
    pub t: Vec<f64>,
    pub phase: Vec<f64>,
    pub model: PhaseNoiseModel,
    pub seed: u64,
}

impl PhaseTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.model.sample_interval
    }
}

pub fn to_degrees(rad: f64) -> f64 {
    rad.to_degrees()
}

/// Samples at `t = 0, Δ, …, duration`.
pub fn simulate_phase_trace(model: &PhaseNoiseModel, duration: f64, seed: u64) -> Result<PhaseTrace> {
    let dt = model.sample_interval;
    if !(duration >= 10.0 * dt) {
        return Err(Error::param(
            "stability.duration",
            format!("{duration} s is shorter than 10 samples"),
        ));
    }
    let n = (duration / dt).round() as usize + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let step = model.rw_sigma * dt.sqrt();
    let mut walk = 0.0;
    let mut t = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    for k in 0..n {
        let tk = k as f64 * dt;
        if k > 0 {
            walk += step * unit.sample(&mut rng);
        }
        let white = model.white_sigma * unit.sample(&mut rng);
        t.push(tk);
        phase.push(model.drift_rate * tk + walk + white);
    }
    Ok(PhaseTrace {
        t,
        phase,
        model: *model,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Mean of the within-window standard deviations.
    WindowStd,
    /// Allan-style deviation of consecutive window means.
    TwoSample,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::WindowStd => "window_std",
            Estimator::TwoSample => "two_sample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseStat {
    pub window: f64,
    pub windows: usize,
    pub window_std: f64,
    pub two_sample: f64,
}

impl PhaseStat {
    pub fn get(&self, estimator: Estimator) -> f64 {
        match estimator {
            Estimator::WindowStd => self.window_std,
            Estimator::TwoSample => self.two_sample,
        }
    }
}

/// Both estimators over non-overlapping windows of length `window`.
pub fn phase_stats(trace: &PhaseTrace, window: f64) -> Result<PhaseStat> {
    let per = (window / trace.model.sample_interval).round() as usize;
    if !(window > 0.0) || per < 2 {
        return Err(Error::param("window", format!("{window} s holds fewer than 2 samples")));
    }
    let k = trace.len() / per;
    if k < 3 || window > trace.duration() / 3.0 + 1e-9 {
        return Err(Error::InsufficientData(format!(
            "{k} windows of {window} s, need at least 3"
        )));
    }
    let mut stds = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    for w in trace.phase.chunks_exact(per).take(k) {
        let m = w.iter().sum::<f64>() / per as f64;
        let var = w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (per - 1) as f64;
        means.push(m);
        stds.push(var.sqrt());
    }
    let window_std = stds.iter().sum::<f64>() / k as f64;
    let two_sample = (means.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum::<f64>()
        / (2.0 * (k - 1) as f64))
        .sqrt();
    Ok(PhaseStat {
        window,
        windows: k,
        window_std,
        two_sample,
    })
}

pub fn windowed_phase_stat(trace: &PhaseTrace, window: f64, estimator: Estimator) -> Result<f64> {
    phase_stats(trace, window).map(|s| s.get(estimator))
}

/// Subtracts the piecewise-linear interpolation of the samples taken every
/// `reference_interval` (extrapolated past the last reference).
pub fn apply_reference_correction(trace: &PhaseTrace, reference_interval: f64) -> Result<PhaseTrace> {
    let dt = trace.model.sample_interval;
    let r = (reference_interval / dt).round() as usize;
    if !(reference_interval >= 2.0 * dt) || r < 2 {
        return Err(Error::param(
            "reference_interval",
            format!("{reference_interval} s is below two samples"),
        ));
    }
    if trace.len() < r + 1 {
        return Err(Error::InsufficientData("trace shorter than two references".into()));
    }
    let refs: Vec<usize> = (0..trace.len()).step_by(r).collect();
    let phase = trace
        .phase
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let seg = (i / r).min(refs.len() - 2);
            let (a, b) = (refs[seg], refs[seg + 1]);
            let (pa, pb) = (trace.phase[a], trace.phase[b]);
            let line = pa + (pb - pa) * (i - a) as f64 / (b - a) as f64;
            p - line
        })
        .collect();
    Ok(PhaseTrace {
        t: trace.t.clone(),
        phase,
        model: trace.model,
        seed: trace.seed,
    })
}
