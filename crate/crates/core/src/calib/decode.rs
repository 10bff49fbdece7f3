//! Inversion of fringe phase and contrast into motional quadratures.
//!
//! The phase table maps the reference-relative fringe phase to `⟨X⟩`
//! (excitations at ϑ0 = 0 and π); the contrast table maps contrast to
//! `|⟨P⟩|` (excitations at ϑ0 = π/2).

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::fit::{fit_cosine, std_dev, CosineFit, FitSample};
use super::interp::Pchip;
use crate::hilbert::{CoherentAmp, UnitScale};
use crate::sequence::{
    run_scan, sem_floor, unwrap_near, Excitation, OuterVar, ScanRecord, ScanSpec, SequenceRunner,
    SequenceSpec,
};
use crate::{Error, Result};

/// Fraction of the table range a value may overshoot before it is an error
/// instead of a clamp.
pub const CLAMP_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeTables {
    /// Fringe phase and contrast of the α = 0 reference.
    pub phi0_ref: f64,
    pub contrast_ref: f64,
    /// `(⟨X⟩ in m, relative phase)` sorted by `⟨X⟩`.
    pos_nodes: Vec<(f64, f64)>,
    /// `(|⟨P⟩| in kg·m/s, contrast)` sorted by `|⟨P⟩|`.
    mom_nodes: Vec<(f64, f64)>,
    pos: Pchip,
    mom: Pchip,
}

fn monotone(values: &[f64], increasing: bool) -> Result<()> {
    for w in values.windows(2) {
        let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
        if !ok {
            return Err(Error::NonMonotone { lo: w[0], hi: w[1] });
        }
    }
    Ok(())
}

impl DecodeTables {
    /// Rebuilds tables from stored nodes, re-checking monotonicity.
    pub fn from_nodes(
        phi0_ref: f64,
        contrast_ref: f64,
        pos_nodes: Vec<(f64, f64)>,
        mom_nodes: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if pos_nodes.len() < 2 || mom_nodes.len() < 2 {
            return Err(Error::InsufficientData("decode tables need >= 2 nodes each".into()));
        }
        let xs: Vec<f64> = pos_nodes.iter().map(|n| n.0).collect();
        let phis: Vec<f64> = pos_nodes.iter().map(|n| n.1).collect();
        monotone(&xs, true)?;
        let decreasing = phis[phis.len() - 1] < phis[0];
        monotone(&phis, !decreasing)?;
        let ps: Vec<f64> = mom_nodes.iter().map(|n| n.0).collect();
        let cs: Vec<f64> = mom_nodes.iter().map(|n| n.1).collect();
        monotone(&ps, true)?;
        monotone(&cs, false)?;

        let mut inv_pos: Vec<(f64, f64)> = pos_nodes.iter().map(|&(x, p)| (p, x)).collect();
        inv_pos.sort_by(|a, b| a.0.total_cmp(&b.0));
        let pos = Pchip::new(
            inv_pos.iter().map(|n| n.0).collect(),
            inv_pos.iter().map(|n| n.1).collect(),
        )?;
        let mut inv_mom: Vec<(f64, f64)> = mom_nodes.iter().map(|&(p, c)| (c, p)).collect();
        inv_mom.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mom = Pchip::new(
            inv_mom.iter().map(|n| n.0).collect(),
            inv_mom.iter().map(|n| n.1).collect(),
        )?;
        Ok(Self {
            phi0_ref,
            contrast_ref,
            pos_nodes,
            mom_nodes,
            pos,
            mom,
        })
    }

    pub fn pos_nodes(&self) -> &[(f64, f64)] {
        &self.pos_nodes
    }

    pub fn mom_nodes(&self) -> &[(f64, f64)] {
        &self.mom_nodes
    }

    /// Range of relative phases covered by the position table.
    pub fn phase_domain(&self) -> (f64, f64) {
        self.pos.domain()
    }

    pub fn contrast_domain(&self) -> (f64, f64) {
        self.mom.domain()
    }
}

fn fit_sweeps(records: &[ScanRecord], n_phi: usize) -> Result<Vec<CosineFit>> {
    records
        .chunks(n_phi)
        .map(|sweep| {
            let samples: Vec<FitSample> = sweep.iter().map(|r| r.fit_sample(None)).collect();
            fit_cosine(&samples).map_err(|e| Error::AtPoint {
                outer: sweep[0].outer,
                phi: f64::NAN,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Tabulates fringe phase and contrast of analytic scans over `alpha_grid`
/// (|α| values, must start at 0 and increase).
pub fn build_decode_tables(
    spec: &SequenceSpec,
    alpha_grid: &[f64],
    phi_grid: &[f64],
    units: &UnitScale,
) -> Result<DecodeTables> {
    if alpha_grid.len() < 2 || alpha_grid[0] != 0.0 {
        return Err(Error::param("tables.alpha_grid", "needs >= 2 values starting at 0"));
    }
    monotone(alpha_grid, true).map_err(|_| Error::param("tables.alpha_grid", "must increase"))?;
    let n_phi = phi_grid.len();
    let sweep = |theta0: f64| -> Result<Vec<CosineFit>> {
        let base = spec.with_excitation(Excitation::Coherent(CoherentAmp::new(0.0, theta0)?));
        let scan = ScanSpec::new(phi_grid.to_vec(), OuterVar::AlphaAbs, alpha_grid.to_vec());
        fit_sweeps(&run_scan(&scan, &base)?, n_phi)
    };
    let plus = sweep(0.0)?;
    let minus = sweep(PI)?;
    let quad = sweep(PI / 2.0)?;
    let phi0_ref = plus[0].phase;
    let contrast_ref = plus[0].contrast;

    let unwrap_branch = |fits: &[CosineFit]| -> Vec<f64> {
        let mut prev = phi0_ref;
        fits.iter()
            .map(|f| {
                prev = unwrap_near(f.phase, prev);
                prev - phi0_ref
            })
            .collect()
    };
    let rel_plus = unwrap_branch(&plus);
    let rel_minus = unwrap_branch(&minus);
    let scale_x = 2.0 * units.x_zpf;
    let mut pos_nodes: Vec<(f64, f64)> = Vec::with_capacity(2 * alpha_grid.len() - 1);
    for i in (1..alpha_grid.len()).rev() {
        pos_nodes.push((-scale_x * alpha_grid[i], rel_minus[i]));
    }
    pos_nodes.push((0.0, 0.0));
    for i in 1..alpha_grid.len() {
        pos_nodes.push((scale_x * alpha_grid[i], rel_plus[i]));
    }
    let mom_nodes: Vec<(f64, f64)> = alpha_grid
        .iter()
        .zip(&quad)
        .map(|(&a, f)| (2.0 * units.p_zpf * a, f.contrast))
        .collect();
    DecodeTables::from_nodes(phi0_ref, contrast_ref, pos_nodes, mom_nodes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoded {
    /// ⟨X⟩, m.
    pub x: f64,
    /// |⟨P⟩|, kg·m/s.
    pub p_abs: f64,
    /// Relative phase actually used (after branch selection).
    pub phase_rel: f64,
    pub x_clamped: bool,
    pub p_clamped: bool,
}

fn clamp_into(value: f64, (lo, hi): (f64, f64)) -> Result<(f64, bool)> {
    if value >= lo && value <= hi {
        return Ok((value, false));
    }
    let margin = CLAMP_MARGIN * (hi - lo);
    if value >= lo - margin && value <= hi + margin {
        Ok((value.clamp(lo, hi), true))
    } else {
        Err(Error::OutOfDomain { value, lo, hi })
    }
}

/// Decodes a reference-relative phase and a contrast expressed on the
/// table's scale. `branch_hint` selects among 2π-equivalent phases
/// (closest wins, default 0).
pub fn decode_relative(
    phase_rel: f64,
    contrast: f64,
    tables: &DecodeTables,
    branch_hint: Option<f64>,
) -> Result<Decoded> {
    let hint = branch_hint.unwrap_or(0.0);
    let (lo, hi) = tables.phase_domain();
    let centred = unwrap_near(phase_rel, hint);
    let candidates = [centred - 2.0 * PI, centred, centred + 2.0 * PI];
    let inside = candidates
        .iter()
        .copied()
        .filter(|c| *c >= lo && *c <= hi)
        .min_by(|a, b| (a - hint).abs().total_cmp(&(b - hint).abs()));
    let chosen = inside.unwrap_or_else(|| {
        let dist = |c: f64| if c < lo { lo - c } else { c - hi };
        candidates
            .iter()
            .copied()
            .min_by(|a, b| dist(*a).total_cmp(&dist(*b)))
            .expect("three candidates")
    });
    let (phase_used, x_clamped) = clamp_into(chosen, (lo, hi))?;
    // contrast above the α = 0 anchor is |P| = 0 however far it overshoots
    let (c_lo, c_hi) = tables.contrast_domain();
    let (c_used, p_clamped) = if contrast > c_hi {
        (c_hi, true)
    } else {
        clamp_into(contrast, (c_lo, c_hi))?
    };
    Ok(Decoded {
        x: tables.pos.eval(phase_used),
        p_abs: tables.mom.eval(c_used).max(0.0),
        phase_rel: phase_used,
        x_clamped,
        p_clamped,
    })
}

/// Decodes a fitted fringe against the tables' stored reference.
pub fn decode_observables(
    fit: &CosineFit,
    tables: &DecodeTables,
    branch_hint: Option<f64>,
) -> Result<Decoded> {
    decode_relative(fit.phase - tables.phi0_ref, fit.contrast, tables, branch_hint)
}

/// Decodes a measurement against an interleaved reference fit: the phase is
/// taken relative to the reference and the contrast is rescaled by the
/// ratio of tabulated to measured reference contrast.
pub fn decode_with_reference(
    measurement: &CosineFit,
    reference: &CosineFit,
    tables: &DecodeTables,
    branch_hint: Option<f64>,
) -> Result<Decoded> {
    let contrast = measurement.contrast * tables.contrast_ref / reference.contrast;
    decode_relative(measurement.phase - reference.phase, contrast, tables, branch_hint)
}

/// Unwraps a phase sequence step by step, then shifts it by a multiple of
/// 2π so its mean lies closest to zero.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(phases.len());
    for &p in phases {
        let next = match out.last() {
            Some(&prev) => unwrap_near(p, prev),
            None => p,
        };
        out.push(next);
    }
    if out.is_empty() {
        return out;
    }
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    let shift = 2.0 * PI * (mean / (2.0 * PI)).round();
    out.iter().map(|p| p - shift).collect()
}

/// Decodes a continuous sweep (e.g. over ϑ0) of reference-relative phases
/// and table-scale contrasts, using the unwrapped sequence as branch hints.
pub fn decode_trace(
    phases_rel: &[f64],
    contrasts: &[f64],
    tables: &DecodeTables,
) -> Vec<Result<Decoded>> {
    unwrap_phases(phases_rel)
        .iter()
        .zip(contrasts)
        .map(|(&p, &c)| decode_relative(p, c, tables, Some(p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFloor {
    /// Standard deviation of decoded ⟨X⟩, m.
    pub sigma_x: f64,
    /// Standard deviation of decoded |⟨P⟩|, kg·m/s.
    pub sigma_p: f64,
    pub decoded: Vec<Decoded>,
}

pub const MIN_NOISE_REPEATS: usize = 20;

/// Repeats α = 0 measurement/reference scans with shot noise and reports
/// the spread of the decoded quadratures.
pub fn noise_floor_estimate(
    spec: &SequenceSpec,
    tables: &DecodeTables,
    phi_grid: &[f64],
    shots: usize,
    repeats: usize,
    seed: u64,
) -> Result<NoiseFloor> {
    if repeats < MIN_NOISE_REPEATS {
        return Err(Error::InsufficientData(format!(
            "{repeats} repeats, need at least {MIN_NOISE_REPEATS}"
        )));
    }
    if shots == 0 {
        return Err(Error::param("noise.shots", "must be >= 1"));
    }
    let runner = SequenceRunner::new(&spec.with_excitation(Excitation::None))?;
    let probs: Vec<f64> = phi_grid
        .iter()
        .map(|&phi| runner.run(phi).map(|o| o.p_down.clamp(0.0, 1.0)))
        .collect::<Result<_>>()?;
    let floor = sem_floor(shots);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<CosineFit> {
        let samples: Vec<FitSample> = phi_grid
            .iter()
            .zip(&probs)
            .map(|(&phi, &p)| {
                let k = Binomial::new(shots as u64, p).expect("p clamped").sample(rng);
                let mean = k as f64 / shots as f64;
                FitSample {
                    phi,
                    p: mean,
                    sem: (mean * (1.0 - mean) / shots as f64).sqrt().max(floor),
                }
            })
            .collect();
        fit_cosine(&samples)
    };
    let mut decoded = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let meas = draw(&mut rng)?;
        let refr = draw(&mut rng)?;
        decoded.push(decode_with_reference(&meas, &refr, tables, None)?);
    }
    let xs: Vec<f64> = decoded.iter().map(|d| d.x).collect();
    let ps: Vec<f64> = decoded.iter().map(|d| d.p_abs).collect();
    Ok(NoiseFloor {
        sigma_x: std_dev(&xs),
        sigma_p: std_dev(&ps),
        decoded,
    })
}
