//! Full experimental sequences and scans.
//!
//! A sequence is: thermal `|↓, n⟩` initial state, optional displacement or
//! squeeze, MW π/2 synchronization pulse, stroboscopic analysis train at
//! phase φ, detection of `P↓`.
//!
//! Excitation parameters refer to the oscillator at the centre of the first
//! analysis flash: a coherent excitation `|α| e^{iϑ0}` has
//! `⟨X⟩ = 2 x_zpf |α| cos ϑ0` and `⟨P⟩ = 2 p_zpf |α| sin ϑ0` there.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::calib::{fit_cosine, FitSample};
use crate::dynamics::{
    mw_rotation, mw_rotation_finite, DephasingSpec, PulseTrainSpec, TrainPropagator,
};
use crate::hilbert::{
    displacement_operator, make_initial_state, squeeze_operator, thermal_sample_with,
    thermal_weights, CoherentAmp, FrameParams, HilbertSpec, ModeParams, Spin, SpinMotionState,
    SqueezeParam,
};
use crate::{CMatrix, Error, Result};

/// Default sync-pulse phase. With it, an idle analysis pulse at relative
/// phase φ gives `P↓ = (1 + cos φ)/2`.
pub const DEFAULT_SYNC_PHASE: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Excitation {
    #[default]
    None,
    Coherent(CoherentAmp),
    Squeeze(SqueezeParam),
}

impl Excitation {
    pub fn required_fock_dim(&self) -> usize {
        match self {
            Excitation::None => 2,
            Excitation::Coherent(a) => a.required_fock_dim(),
            Excitation::Squeeze(z) => z.required_fock_dim(),
        }
    }
}

/// How the thermal initial state is averaged over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalAveraging {
    /// Weighted sum over Fock levels until the remaining tail is below `tail`.
    Exact { tail: f64 },
    /// Monte-Carlo draws of the initial Fock level.
    Sampled { samples: usize, seed: u64 },
}

impl Default for ThermalAveraging {
    fn default() -> Self {
        ThermalAveraging::Exact { tail: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncPulse {
    pub phase: f64,
    /// `Some(Ω)` switches to a finite-duration pulse at that Rabi rate.
    pub finite_rabi: Option<f64>,
}

impl Default for SyncPulse {
    fn default() -> Self {
        Self {
            phase: DEFAULT_SYNC_PHASE,
            finite_rabi: None,
        }
    }
}

impl SyncPulse {
    pub fn duration(&self) -> f64 {
        match self.finite_rabi {
            Some(rabi) => std::f64::consts::FRAC_PI_2 / rabi,
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceSpec {
    pub hilbert: HilbertSpec,
    pub mode: ModeParams,
    pub frame: FrameParams,
    pub thermal: ThermalAveraging,
    pub excitation: Excitation,
    pub sync: SyncPulse,
    pub analysis: PulseTrainSpec,
    pub dephasing: DephasingSpec,
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        self.analysis.validate()?;
        let required = self.excitation.required_fock_dim();
        if self.hilbert.fock_dim() < required {
            return Err(Error::TruncationRule {
                what: match self.excitation {
                    Excitation::Squeeze(_) => "squeezing",
                    _ => "coherent displacement",
                },
                required,
                available: self.hilbert.fock_dim(),
            });
        }
        if let ThermalAveraging::Sampled { samples: 0, .. } = self.thermal {
            return Err(Error::param("thermal.samples", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_excitation(mut self, excitation: Excitation) -> Self {
        self.excitation = excitation;
        self
    }

    /// Time between the sync pulse start and detection.
    pub fn elapsed(&self) -> f64 {
        self.sync.duration() + self.analysis.total_duration()
    }

    /// Dephasing factor applied to `⟨σ_z⟩`.
    pub fn envelope(&self) -> f64 {
        self.dephasing.factor(self.elapsed())
    }

    /// Time from excitation to the centre of the first flash.
    fn reference_delay(&self) -> f64 {
        self.sync.duration() + 0.5 * self.analysis.flash_dur
    }

    /// Excitation operator on the Fock space, phase-advanced so that the
    /// parameters hold at the centre of the first flash.
    fn excitation_operator(&self) -> Result<Option<CMatrix>> {
        let advance = self.mode.freq * self.reference_delay();
        match self.excitation {
            Excitation::None => Ok(None),
            Excitation::Coherent(a) => {
                let prepared = CoherentAmp::new(a.magnitude, a.phase + advance)?;
                Ok(Some(displacement_operator(prepared, &self.hilbert)?))
            }
            Excitation::Squeeze(z) => {
                let prepared = SqueezeParam::new(z.magnitude, z.phase + 2.0 * advance)?;
                Ok(Some(squeeze_operator(prepared, &self.hilbert)?))
            }
        }
    }

    /// `(fock level, weight)` pairs of the initial thermal ensemble, kept
    /// below the top levels watched by the truncation check.
    pub fn thermal_ensemble(&self) -> Result<Vec<(usize, f64)>> {
        let usable = self.hilbert.fock_dim() - self.hilbert.top_levels();
        let n_th = self.mode.n_th;
        match self.thermal {
            ThermalAveraging::Exact { tail } => {
                let q = n_th / (1.0 + n_th);
                let beyond = q.powi(usable as i32);
                if beyond >= self.hilbert.tail_tol() {
                    return Err(Error::TruncationRule {
                        what: "thermal state",
                        required: thermal_levels_needed(q, self.hilbert.tail_tol())
                            + self.hilbert.top_levels(),
                        available: self.hilbert.fock_dim(),
                    });
                }
                Ok(thermal_weights(n_th, usable, tail))
            }
            ThermalAveraging::Sampled { samples, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut counts = vec![0usize; usable];
                for _ in 0..samples {
                    let n = thermal_sample_with(n_th, &mut rng);
                    if n >= usable {
                        return Err(Error::TruncationRule {
                            what: "thermal sample",
                            required: n + 1 + self.hilbert.top_levels(),
                            available: self.hilbert.fock_dim(),
                        });
                    }
                    counts[n] += 1;
                }
                Ok(counts
                    .into_iter()
                    .enumerate()
                    .filter(|(_, c)| *c > 0)
                    .map(|(n, c)| (n, c as f64 / samples as f64))
                    .collect())
            }
        }
    }
}

fn thermal_levels_needed(q: f64, tol: f64) -> usize {
    if q <= 0.0 {
        1
    } else {
        (tol.ln() / q.ln()).ceil() as usize
    }
}

/// Outcome of one sequence at one analysis phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceOutcome {
    /// Detected `P↓` with the dephasing envelope applied.
    pub p_down: f64,
    /// `P↓` before the envelope.
    pub p_down_raw: f64,
    pub n_initial: f64,
    pub n_final: f64,
    pub delta_n: f64,
}

struct Member {
    weight: f64,
    n_initial: f64,
    state: SpinMotionState,
}

/// A sequence with its thermal ensemble prepared up to the analysis train.
pub struct SequenceRunner {
    spec: SequenceSpec,
    train: Arc<TrainPropagator>,
    members: Vec<Member>,
    envelope: f64,
    harmonics: OnceLock<Result<Harmonics>>,
}

/// First-harmonic coefficients `(c0, c1, s1)` of the ensemble observables
/// in the total analysis phase.
///
/// The phase enters only through `exp(iφσ_z/2)` conjugation of the
/// post-sync state, so every expectation value after the train is exactly
/// `c0 + c1 cos φ + s1 sin φ`; three evaluations fix a whole sweep.
#[derive(Debug, Clone, Copy)]
struct Harmonics {
    p_down: [f64; 3],
    n_final: [f64; 3],
    tail: [f64; 3],
}

impl Harmonics {
    fn eval(c: &[f64; 3], phi: f64) -> f64 {
        c[0] + c[1] * phi.cos() + c[2] * phi.sin()
    }
}

#[derive(Debug, Clone, Copy)]
struct Raw {
    p_down: f64,
    n_final: f64,
    tail: f64,
}

impl SequenceRunner {
    pub fn new(spec: &SequenceSpec) -> Result<Self> {
        spec.validate()?;
        let train = TrainPropagator::new(&spec.hilbert, &spec.analysis, &spec.mode, &spec.frame)?;
        SequenceRunner::build(spec, Arc::new(train))
    }

    /// Reuses an already built train; it must match `spec.analysis`.
    pub fn with_train(spec: &SequenceSpec, train: Arc<TrainPropagator>) -> Result<Self> {
        spec.validate()?;
        SequenceRunner::build(spec, train)
    }

    fn build(spec: &SequenceSpec, train: Arc<TrainPropagator>) -> Result<Self> {
        let excite = spec.excitation_operator()?;
        let mut members = Vec::new();
        for (n, weight) in spec.thermal_ensemble()? {
            let mut psi = make_initial_state(Spin::Down, n, &spec.hilbert)?;
            if let Some(op) = &excite {
                psi = psi.apply_motion(op)?;
            }
            let n_initial = psi.mean_n();
            psi = match spec.sync.finite_rabi {
                None => mw_rotation(&psi, std::f64::consts::FRAC_PI_2, spec.sync.phase),
                Some(rabi) => mw_rotation_finite(
                    &psi,
                    std::f64::consts::FRAC_PI_2,
                    spec.sync.phase,
                    rabi,
                    &spec.mode,
                    &spec.frame,
                    &spec.hilbert,
                )?,
            };
            members.push(Member {
                weight,
                n_initial,
                state: psi,
            });
        }
        Ok(Self {
            spec: *spec,
            train,
            members,
            envelope: spec.envelope(),
            harmonics: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &SequenceSpec {
        &self.spec
    }

    fn n_initial(&self) -> f64 {
        self.members.iter().map(|m| m.weight * m.n_initial).sum()
    }

    /// Ensemble average after the train at total phase `phi`.
    fn raw(&self, phi: f64) -> Result<Raw> {
        let top = self.spec.hilbert.top_levels();
        let mut raw = Raw {
            p_down: 0.0,
            n_final: 0.0,
            tail: 0.0,
        };
        for m in &self.members {
            let out = self.train.run_unchecked(&m.state, phi)?;
            let pops = out.fock_populations();
            raw.tail += m.weight * pops[pops.len() - top..].iter().sum::<f64>();
            raw.p_down += m.weight * out.p_down();
            raw.n_final += m.weight * out.mean_n();
        }
        Ok(raw)
    }

    fn harmonics(&self) -> Result<Harmonics> {
        self.harmonics
            .get_or_init(|| {
                let phis = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];
                let mut raws = Vec::with_capacity(3);
                for phi in phis {
                    raws.push(self.raw(phi)?);
                }
                let fit = |f: &dyn Fn(&Raw) -> f64| -> [f64; 3] {
                    let v: Vec<f64> = raws.iter().map(f).collect();
                    [
                        v.iter().sum::<f64>() / 3.0,
                        2.0 / 3.0 * v.iter().zip(phis).map(|(x, p)| x * p.cos()).sum::<f64>(),
                        2.0 / 3.0 * v.iter().zip(phis).map(|(x, p)| x * p.sin()).sum::<f64>(),
                    ]
                };
                Ok(Harmonics {
                    p_down: fit(&|r| r.p_down),
                    n_final: fit(&|r| r.n_final),
                    tail: fit(&|r| r.tail),
                })
            })
            .clone()
    }

    fn outcome(&self, raw: Raw) -> Result<SequenceOutcome> {
        let tol = self.spec.hilbert.tail_tol();
        if !(raw.tail < tol) {
            return Err(Error::TruncationLeak { tail: raw.tail, tol });
        }
        let n_initial = self.n_initial();
        Ok(SequenceOutcome {
            p_down: 0.5 + self.envelope * (raw.p_down - 0.5),
            p_down_raw: raw.p_down,
            n_initial,
            n_final: raw.n_final,
            delta_n: raw.n_final - n_initial,
        })
    }

    /// Outcome at analysis phase `phi` (added to the train's base phase).
    pub fn run(&self, phi: f64) -> Result<SequenceOutcome> {
        let total = phi + self.spec.analysis.base_phase;
        let h = self.harmonics()?;
        self.outcome(Raw {
            p_down: Harmonics::eval(&h.p_down, total),
            n_final: Harmonics::eval(&h.n_final, total),
            tail: Harmonics::eval(&h.tail, total),
        })
    }

    /// Same as [`SequenceRunner::run`], propagating the ensemble at `phi`
    /// instead of using the harmonic decomposition.
    pub fn run_direct(&self, phi: f64) -> Result<SequenceOutcome> {
        self.outcome(self.raw(phi + self.spec.analysis.base_phase)?)
    }
}

/// `(p_down, delta_n)` of a single sequence at analysis phase `phi`.
pub fn run_sequence(spec: &SequenceSpec, phi: f64) -> Result<(f64, f64)> {
    let out = SequenceRunner::new(spec)?.run(phi)?;
    Ok((out.p_down, out.delta_n))
}

/// Bernoulli detection of `shots` repetitions: `(mean, sem)`.
pub fn sample_detection(p_down: f64, shots: usize, seed: u64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&p_down) {
        return Err(Error::param("p_down", format!("{p_down} not in [0, 1]")));
    }
    if shots == 0 {
        return Err(Error::param("shots", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = Binomial::new(shots as u64, p_down)
        .map_err(|e| Error::param("p_down", e.to_string()))?
        .sample(&mut rng);
    let mean = k as f64 / shots as f64;
    Ok((mean, (mean * (1.0 - mean) / shots as f64).sqrt()))
}

/// Lower bound applied to the standard error before weighting fits.
pub fn sem_floor(shots: usize) -> f64 {
    1.0 / (2.0 * shots as f64)
}

/// Which excitation parameter the outer scan axis sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterVar {
    /// ϑ0 of the coherent excitation (magnitude from the base spec).
    AlphaPhase,
    AlphaAbs,
    /// ζ0 of the squeeze (magnitude from the base spec).
    ZetaPhase,
    ZetaAbs,
    /// Outer values are labels only.
    None,
}

impl OuterVar {
    pub fn apply(self, base: Excitation, value: f64) -> Result<Excitation> {
        let coherent = |e: Excitation| match e {
            Excitation::Coherent(a) => a,
            _ => CoherentAmp::default(),
        };
        let squeeze = |e: Excitation| match e {
            Excitation::Squeeze(z) => z,
            _ => SqueezeParam::default(),
        };
        Ok(match self {
            OuterVar::AlphaPhase => {
                Excitation::Coherent(CoherentAmp::new(coherent(base).magnitude, value)?)
            }
            OuterVar::AlphaAbs => Excitation::Coherent(CoherentAmp::new(value, coherent(base).phase)?),
            OuterVar::ZetaPhase => {
                Excitation::Squeeze(SqueezeParam::new(squeeze(base).magnitude, value)?)
            }
            OuterVar::ZetaAbs => Excitation::Squeeze(SqueezeParam::new(value, squeeze(base).phase)?),
            OuterVar::None => base,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub phi_grid: Vec<f64>,
    pub outer_var: OuterVar,
    pub outer_grid: Vec<f64>,
    /// `None` is analytic mode (no shot noise).
    pub shots: Option<usize>,
    pub base_seed: u64,
    pub interleave_reference: bool,
    /// Optional phase offset per point index, added to the drive phase of
    /// both the measurement and its reference.
    pub drift: Option<Vec<f64>>,
}

impl ScanSpec {
    pub fn new(phi_grid: Vec<f64>, outer_var: OuterVar, outer_grid: Vec<f64>) -> Self {
        Self {
            phi_grid,
            outer_var,
            outer_grid,
            shots: None,
            base_seed: 0,
            interleave_reference: false,
            drift: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi_grid.is_empty() {
            return Err(Error::param("scan.phi_grid", "must be non-empty"));
        }
        if self.outer_grid.is_empty() {
            return Err(Error::param("scan.outer_grid", "must be non-empty"));
        }
        if self.shots == Some(0) {
            return Err(Error::param("scan.shots", "must be >= 1"));
        }
        if let Some(d) = &self.drift {
            if d.len() < self.len() {
                return Err(Error::param(
                    "scan.drift",
                    format!("{} offsets for {} points", d.len(), self.len()),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.phi_grid.len() * self.outer_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(outer, phi)` of point `index` (outer-major).
    pub fn coordinates(&self, index: usize) -> (f64, f64) {
        let n_phi = self.phi_grid.len();
        (self.outer_grid[index / n_phi], self.phi_grid[index % n_phi])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRecord {
    pub index: usize,
    pub phi: f64,
    pub outer: f64,
    pub p_down_mean: f64,
    pub p_down_sem: f64,
    pub sigma_z: f64,
    pub delta_n: f64,
}

impl ScanRecord {
    fn new(index: usize, outer: f64, phi: f64, mean: f64, sem: f64, delta_n: f64) -> Self {
        Self {
            index,
            phi,
            outer,
            p_down_mean: mean,
            p_down_sem: sem,
            sigma_z: 1.0 - 2.0 * mean,
            delta_n,
        }
    }

    pub fn fit_sample(&self, shots: Option<usize>) -> FitSample {
        let sem = match shots {
            Some(s) => self.p_down_sem.max(sem_floor(s)),
            None => self.p_down_sem,
        };
        FitSample {
            phi: self.phi,
            p: self.p_down_mean,
            sem,
        }
    }
}

/// A measurement record and its adjacent α = 0 reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordPair {
    pub measurement: ScanRecord,
    pub reference: Option<ScanRecord>,
}

fn detect(scan: &ScanSpec, p: f64, seed: u64) -> Result<(f64, f64)> {
    match scan.shots {
        None => Ok((p, 0.0)),
        Some(shots) => sample_detection(p.clamp(0.0, 1.0), shots, seed),
    }
}

fn at_point(outer: f64, phi: f64) -> impl Fn(Error) -> Error {
    move |e| Error::AtPoint {
        outer,
        phi,
        source: Box::new(e),
    }
}

/// Builds one runner per outer value, sharing the analysis train.
fn runners(
    scan: &ScanSpec,
    spec: &SequenceSpec,
    train: &Arc<TrainPropagator>,
) -> Result<Vec<SequenceRunner>> {
    scan.outer_grid
        .par_iter()
        .map(|&outer| {
            let excitation = scan.outer_var.apply(spec.excitation, outer)?;
            SequenceRunner::with_train(&spec.with_excitation(excitation), Arc::clone(train))
                .map_err(at_point(outer, f64::NAN))
        })
        .collect()
}

/// Runs every `(outer, phi)` point; records are outer-major and the point
/// seed is `base_seed + index`.
///
/// With `interleave_reference` set, each point is paired with an α = 0
/// reference and the returned records are drift-corrected.
pub fn run_scan(scan: &ScanSpec, spec: &SequenceSpec) -> Result<Vec<ScanRecord>> {
    if scan.interleave_reference {
        let pairs = run_interleaved_scan(scan, spec)?;
        return interleaved_reference(&pairs);
    }
    scan.validate()?;
    let train = Arc::new(TrainPropagator::new(&spec.hilbert, &spec.analysis, &spec.mode, &spec.frame)?);
    let runners = runners(scan, spec, &train)?;
    let n_phi = scan.phi_grid.len();
    (0..scan.len())
        .into_par_iter()
        .map(|index| {
            let (outer, phi) = scan.coordinates(index);
            let drive_phi = phi + scan.drift.as_ref().map_or(0.0, |d| d[index]);
            let out = runners[index / n_phi]
                .run(drive_phi)
                .map_err(at_point(outer, phi))?;
            let (mean, sem) =
                detect(scan, out.p_down, scan.base_seed.wrapping_add(index as u64))?;
            Ok(ScanRecord::new(index, outer, phi, mean, sem, out.delta_n))
        })
        .collect()
}

/// Measurement/reference pairs; the reference of point `i` uses seed
/// `base_seed + len + i` and shares the drift offset of point `i`.
pub fn run_interleaved_scan(scan: &ScanSpec, spec: &SequenceSpec) -> Result<Vec<RecordPair>> {
    scan.validate()?;
    let train = Arc::new(TrainPropagator::new(&spec.hilbert, &spec.analysis, &spec.mode, &spec.frame)?);
    let runners = runners(scan, spec, &train)?;
    let reference = SequenceRunner::with_train(&spec.with_excitation(Excitation::None), Arc::clone(&train))?;
    let n_phi = scan.phi_grid.len();
    let total = scan.len() as u64;
    (0..scan.len())
        .into_par_iter()
        .map(|index| {
            let (outer, phi) = scan.coordinates(index);
            let drive_phi = phi + scan.drift.as_ref().map_or(0.0, |d| d[index]);
            let meas = runners[index / n_phi]
                .run(drive_phi)
                .map_err(at_point(outer, phi))?;
            let refr = reference.run(drive_phi).map_err(at_point(outer, phi))?;
            let seed = scan.base_seed.wrapping_add(index as u64);
            let (m_mean, m_sem) = detect(scan, meas.p_down, seed)?;
            let (r_mean, r_sem) = detect(scan, refr.p_down, seed.wrapping_add(total))?;
            Ok(RecordPair {
                measurement: ScanRecord::new(index, outer, phi, m_mean, m_sem, meas.delta_n),
                reference: Some(ScanRecord::new(index, outer, phi, r_mean, r_sem, refr.delta_n)),
            })
        })
        .collect()
}

/// Removes slow phase drift using the interleaved α = 0 references.
///
/// Consecutive pairs sharing an outer value form one φ sweep; a cosine fit
/// to each sweep's references gives the drift at the sweep's centre, and
/// the drift at every point is linearly interpolated between sweep centres
/// (extrapolated beyond the ends). The estimate is subtracted from the φ
/// coordinates of the measurement records.
pub fn interleaved_reference(pairs: &[RecordPair]) -> Result<Vec<ScanRecord>> {
    let drift = estimate_reference_drift(pairs)?;
    Ok(pairs
        .iter()
        .zip(drift)
        .map(|(pair, d)| {
            let mut rec = pair.measurement;
            rec.phi -= d;
            rec
        })
        .collect())
}

/// Per-pair drift estimate (rad) from the references.
pub fn estimate_reference_drift(pairs: &[RecordPair]) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let mut refs = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        match pair.reference {
            Some(r) => refs.push(r),
            None => {
                return Err(Error::MissingReference(format!(
                    "pair {i} (index {}) has no reference record",
                    pair.measurement.index
                )))
            }
        }
    }
    // sweeps: maximal runs of equal outer value
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=pairs.len() {
        if i == pairs.len() || pairs[i].measurement.outer != pairs[start].measurement.outer {
            blocks.push((start, i));
            start = i;
        }
    }
    let mut centres = Vec::with_capacity(blocks.len());
    let mut estimates = Vec::with_capacity(blocks.len());
    let mut previous: Option<f64> = None;
    for &(lo, hi) in &blocks {
        let samples: Vec<FitSample> = refs[lo..hi]
            .iter()
            .map(|r| FitSample {
                phi: r.phi,
                p: r.p_down_mean,
                sem: r.p_down_sem,
            })
            .collect();
        let fit = fit_cosine(&samples)?;
        let mut phase = fit.phase;
        if let Some(prev) = previous {
            phase = unwrap_near(phase, prev);
        }
        previous = Some(phase);
        centres.push(0.5 * ((lo + hi - 1) as f64));
        estimates.push(phase);
    }
    Ok((0..pairs.len())
        .map(|i| interpolate_linear(&centres, &estimates, i as f64))
        .collect())
}

/// `value + 2πk` closest to `target`.
pub fn unwrap_near(value: f64, target: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    value + tau * ((target - value) / tau).round()
}

fn interpolate_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.len() == 1 {
        return ys[0];
    }
    let seg = match xs.iter().position(|&c| c > x) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => xs.len() - 2,
    };
    let seg = seg.min(xs.len() - 2);
    let (x0, x1, y0, y1) = (xs[seg], xs[seg + 1], ys[seg], ys[seg + 1]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Traveling-wave pattern in the x-z plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternField {
    /// Period λ, m.
    pub wavelength: f64,
    /// Angle of the wave vector to z, rad.
    pub rotation: f64,
    pub phase_origin: f64,
    /// Fringe visibility used by [`PatternField::probe`].
    pub amplitude: f64,
}

impl PatternField {
    pub fn new(wavelength: f64, rotation: f64, phase_origin: f64, amplitude: f64) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(Error::param("pattern.wavelength", format!("{wavelength} must be > 0")));
        }
        Ok(Self {
            wavelength,
            rotation,
            phase_origin,
            amplitude,
        })
    }

    /// Pattern phase at `(x, z)`.
    pub fn phase_at(&self, x: f64, z: f64) -> f64 {
        2.0 * std::f64::consts::PI * (x * self.rotation.sin() + z * self.rotation.cos())
            / self.wavelength
            + self.phase_origin
    }

    pub fn probe(&self, x: f64, z: f64) -> f64 {
        static_pattern_probe(x, z, self, self.amplitude)
    }
}

/// `P↓` of a static ion at `(x, z)` probed at a fixed analysis phase.
pub fn static_pattern_probe(x: f64, z: f64, field: &PatternField, contrast: f64) -> f64 {
    0.5 + 0.5 * contrast * field.phase_at(x, z).cos()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternPoint {
    pub x: f64,
    pub z: f64,
    pub p_down: f64,
    pub sem: f64,
}

/// Square `grid_num × grid_num` grid over `[-half_extent, half_extent]²`,
/// z-major; point `i` uses seed `base_seed + i` in shot mode.
pub fn pattern_grid_scan(
    field: &PatternField,
    contrast: f64,
    half_extent: f64,
    grid_num: usize,
    shots: Option<usize>,
    base_seed: u64,
) -> Result<Vec<PatternPoint>> {
    if grid_num < 2 {
        return Err(Error::param("pattern.grid_num", "must be >= 2"));
    }
    let step = 2.0 * half_extent / (grid_num - 1) as f64;
    let mut out = Vec::with_capacity(grid_num * grid_num);
    for iz in 0..grid_num {
        for ix in 0..grid_num {
            let x = -half_extent + ix as f64 * step;
            let z = -half_extent + iz as f64 * step;
            let p = static_pattern_probe(x, z, field, contrast);
            let index = (iz * grid_num + ix) as u64;
            let (mean, sem) = match shots {
                None => (p, 0.0),
                Some(s) => sample_detection(p, s, base_seed.wrapping_add(index))?,
            };
            out.push(PatternPoint {
                x,
                z,
                p_down: mean,
                sem: match shots {
                    Some(s) => sem.max(sem_floor(s)),
                    None => sem,
                },
            });
        }
    }
    Ok(out)
}
