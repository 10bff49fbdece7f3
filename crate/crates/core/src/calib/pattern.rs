//! Fit of a planar wave `½ + (A/2) cos(k·r + φ)` to a static x-z scan.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::fit::{std_dev, wrap_phase};
use crate::sequence::PatternPoint;
use crate::{Error, Result};

pub const MIN_PATTERN_POINTS: usize = 30;
const LAMBDA_STEPS: usize = 80;
const THETA_STEPS: usize = 180;
const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternFit {
    /// λ, m.
    pub wavelength: f64,
    /// Angle of k to z, rad, in (−π/2, π/2].
    pub rotation: f64,
    pub phase_origin: f64,
    pub amplitude: f64,
    pub wavelength_err: f64,
    pub rotation_err: f64,
    pub residual_rms: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
}

/// Internal parameters in scaled length units: `(kx, kz, a, b)` with
/// `p − ½ = a cos ψ + b sin ψ`, `ψ = kx x + kz z`.
#[derive(Debug, Clone, Copy)]
struct Params(Vector4<f64>);

struct Prepared {
    xs: Vec<f64>,
    zs: Vec<f64>,
    ys: Vec<f64>,
    ws: Vec<f64>,
    scale: f64,
    centre: (f64, f64),
}

fn prepare(points: &[PatternPoint]) -> Result<Prepared> {
    if points.len() < MIN_PATTERN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} pattern points, need at least {MIN_PATTERN_POINTS}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.x.is_finite() && p.z.is_finite() && p.p_down.is_finite())) {
        return Err(Error::Fit("non-finite pattern point".into()));
    }
    let (xmin, xmax) = min_max(points.iter().map(|p| p.x));
    let (zmin, zmax) = min_max(points.iter().map(|p| p.z));
    let scale = (xmax - xmin).hypot(zmax - zmin);
    if !(scale > 0.0) {
        return Err(Error::ExtentInsufficient {
            extent: 0.0,
            wavelength: f64::NAN,
        });
    }
    let (cx, cz) = (0.5 * (xmin + xmax), 0.5 * (zmin + zmax));
    let weighted = points.iter().all(|p| p.sem > 0.0);
    Ok(Prepared {
        // centred for conditioning; the phase origin is shifted back later
        xs: points.iter().map(|p| (p.x - cx) / scale).collect(),
        zs: points.iter().map(|p| (p.z - cz) / scale).collect(),
        ys: points.iter().map(|p| p.p_down - 0.5).collect(),
        ws: points
            .iter()
            .map(|p| if weighted { 1.0 / (p.sem * p.sem) } else { 1.0 })
            .collect(),
        scale,
        centre: (cx, cz),
    })
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl Prepared {
    fn n(&self) -> usize {
        self.ys.len()
    }

    fn centre(&self) -> (f64, f64) {
        self.centre
    }

    /// Best `(a, b)` and weighted RSS for fixed `(kx, kz)`.
    fn linear(&self, kx: f64, kz: f64) -> (f64, f64, f64) {
        let mut m = Matrix2::zeros();
        let mut r = Vector2::zeros();
        for i in 0..self.n() {
            let psi = kx * self.xs[i] + kz * self.zs[i];
            let v = Vector2::new(psi.cos(), psi.sin());
            m += self.ws[i] * v * v.transpose();
            r += self.ws[i] * self.ys[i] * v;
        }
        let ab = m.lu().solve(&r).unwrap_or_else(Vector2::zeros);
        (ab[0], ab[1], self.rss(&Params(Vector4::new(kx, kz, ab[0], ab[1]))))
    }

    fn rss(&self, p: &Params) -> f64 {
        let v = p.0;
        (0..self.n())
            .map(|i| {
                let psi = v[0] * self.xs[i] + v[1] * self.zs[i];
                let r = self.ys[i] - v[2] * psi.cos() - v[3] * psi.sin();
                self.ws[i] * r * r
            })
            .sum()
    }

    fn normal_equations(&self, p: &Params) -> (Matrix4<f64>, Vector4<f64>) {
        let v = p.0;
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for i in 0..self.n() {
            let (x, z) = (self.xs[i], self.zs[i]);
            let psi = v[0] * x + v[1] * z;
            let (c, s) = (psi.cos(), psi.sin());
            let dpsi = -v[2] * s + v[3] * c;
            let j = Vector4::new(x * dpsi, z * dpsi, c, s);
            let r = self.ys[i] - v[2] * c - v[3] * s;
            jtj += self.ws[i] * j * j.transpose();
            jtr += self.ws[i] * r * j;
        }
        (jtj, jtr)
    }
}

fn coarse_start(d: &Prepared) -> Params {
    // scaled extent is 1 by construction
    let spacing = 1.0 / (d.n() as f64).sqrt();
    let lam_min = (2.5 * spacing).max(1.0 / 50.0);
    let lam_max = 2.0;
    let mut best = (f64::INFINITY, Params(Vector4::zeros()));
    for il in 0..LAMBDA_STEPS {
        let lam = lam_min * (lam_max / lam_min).powf(il as f64 / (LAMBDA_STEPS - 1) as f64);
        let k = 2.0 * PI / lam;
        for it in 0..THETA_STEPS {
            let theta = -PI / 2.0 + PI * (it as f64 + 1.0) / THETA_STEPS as f64;
            let (kx, kz) = (k * theta.sin(), k * theta.cos());
            let (a, b, rss) = d.linear(kx, kz);
            if rss < best.0 {
                best = (rss, Params(Vector4::new(kx, kz, a, b)));
            }
        }
    }
    best.1
}

fn refine(d: &Prepared, start: Params) -> Result<(Params, Matrix4<f64>, usize)> {
    let mut p = start;
    let mut rss = d.rss(&p);
    let mut mu = 1e-3;
    for iter in 1..=MAX_ITERATIONS {
        let (jtj, jtr) = d.normal_equations(&p);
        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] *= 1.0 + mu;
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let trial = Params(p.0 + step);
            let trial_rss = d.rss(&trial);
            if trial_rss <= rss {
                let converged = step.norm() <= 1e-12 * (1.0 + p.0.norm())
                    || (rss - trial_rss) <= 1e-15 * rss.max(1e-300);
                p = trial;
                rss = trial_rss;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
                if converged {
                    let (jtj, _) = d.normal_equations(&p);
                    return Ok((p, jtj, iter));
                }
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            // no downhill step left: at the minimum to working precision
            let (jtj, _) = d.normal_equations(&p);
            return Ok((p, jtj, iter));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}

fn finish(d: &Prepared, p: Params, jtj: Matrix4<f64>, iterations: usize) -> Result<PatternFit> {
    let v = p.0;
    let (mut kx, mut kz, a, b) = (v[0], v[1], v[2], v[3]);
    let mut phase = (-b).atan2(a);
    let amplitude = 2.0 * a.hypot(b);
    let mut theta = kx.atan2(kz);
    if theta > PI / 2.0 || theta <= -PI / 2.0 {
        // k → −k flips the sign of the phase
        theta = wrap_phase(theta + PI);
        kx = -kx;
        kz = -kz;
        phase = -phase;
        if theta <= -PI / 2.0 {
            theta += PI;
        }
    }
    let k = kx.hypot(kz);
    let wavelength = 2.0 * PI / k * d.scale;

    let extent = {
        let (lo, hi) = min_max(
            (0..d.n()).map(|i| (d.xs[i] * theta.sin() + d.zs[i] * theta.cos()) * d.scale),
        );
        hi - lo
    };
    if extent < wavelength {
        return Err(Error::ExtentInsufficient { extent, wavelength });
    }

    let rss = d.rss(&p);
    let residual_rms = ((0..d.n())
        .map(|i| {
            let psi = v[0] * d.xs[i] + v[1] * d.zs[i];
            (d.ys[i] - v[2] * psi.cos() - v[3] * psi.sin()).powi(2)
        })
        .sum::<f64>()
        / d.n() as f64)
        .sqrt();
    let dof = (d.n() - 4).max(1) as f64;
    let reduced_chi2 = rss / dof;
    let weighted = d.ws.iter().any(|&w| w != 1.0);
    let inv = jtj
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular pattern normal matrix".into()))?;
    let cov = if weighted { inv } else { inv * reduced_chi2 };
    let k3 = k * k * k;
    let g_lam = Vector2::new(-2.0 * PI * kx / k3, -2.0 * PI * kz / k3) * d.scale;
    let g_th = Vector2::new(kz / (k * k), -kx / (k * k));
    let ck = cov.fixed_view::<2, 2>(0, 0).into_owned();
    let wavelength_err = (g_lam.transpose() * ck * g_lam)[0].sqrt();
    let rotation_err = (g_th.transpose() * ck * g_th)[0].sqrt();

    // data were centred; move the phase origin back to (0, 0)
    let (cx, cz) = d.centre();
    let phase_origin = wrap_phase(phase - (kx * cx + kz * cz) / d.scale);
    Ok(PatternFit {
        wavelength,
        rotation: theta,
        phase_origin,
        amplitude,
        wavelength_err,
        rotation_err,
        residual_rms,
        reduced_chi2,
        iterations,
    })
}

pub fn fit_wave_pattern(points: &[PatternPoint]) -> Result<PatternFit> {
    let d = prepare(points)?;
    let start = coarse_start(&d);
    let (p, jtj, it) = refine(&d, start)?;
    finish(&d, p, jtj, it)
}

/// Refines from a known solution instead of the coarse grid.
pub fn fit_wave_pattern_from(points: &[PatternPoint], init: &PatternFit) -> Result<PatternFit> {
    let d = prepare(points)?;
    let (cx, cz) = d.centre();
    let k = 2.0 * PI / init.wavelength;
    let (kx, kz) = (k * init.rotation.sin(), k * init.rotation.cos());
    let phase = init.phase_origin + kx * cx + kz * cz;
    let half = 0.5 * init.amplitude;
    let start = Params(Vector4::new(
        kx * d.scale,
        kz * d.scale,
        half * phase.cos(),
        -half * phase.sin(),
    ));
    let (p, jtj, it) = refine(&d, start)?;
    finish(&d, p, jtj, it)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternBootstrap {
    pub wavelength_std: f64,
    pub rotation_std: f64,
    pub replicas: usize,
}

/// Parametric-binomial bootstrap of a pattern fit.
pub fn bootstrap_pattern(
    points: &[PatternPoint],
    fit: &PatternFit,
    shots: usize,
    replicas: usize,
    seed: u64,
) -> Result<PatternBootstrap> {
    if replicas < 2 || shots == 0 {
        return Err(Error::param("bootstrap", "need replicas >= 2 and shots >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 2.0 * PI / fit.wavelength;
    let floor = 1.0 / (2.0 * shots as f64);
    let mut lams = Vec::with_capacity(replicas);
    let mut ths = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let draw: Vec<PatternPoint> = points
            .iter()
            .map(|pt| {
                let psi = k * (pt.x * fit.rotation.sin() + pt.z * fit.rotation.cos()) + fit.phase_origin;
                let p = (0.5 + 0.5 * fit.amplitude * psi.cos()).clamp(0.0, 1.0);
                let hits = Binomial::new(shots as u64, p).expect("p clamped").sample(&mut rng);
                let mean = hits as f64 / shots as f64;
                PatternPoint {
                    x: pt.x,
                    z: pt.z,
                    p_down: mean,
                    sem: (mean * (1.0 - mean) / shots as f64).sqrt().max(floor),
                }
            })
            .collect();
        let f = fit_wave_pattern_from(&draw, fit)?;
        lams.push(f.wavelength);
        ths.push(f.rotation);
    }
    Ok(PatternBootstrap {
        wavelength_std: std_dev(&lams),
        rotation_std: std_dev(&ths),
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{pattern_grid_scan, PatternField};

    #[test]
    fn recovers_noiseless_pattern() {
        let field = PatternField::new(138e-9, 0.840, 0.7, 0.76).unwrap();
        let pts = pattern_grid_scan(&field, 0.76, 200e-9, 26, None, 0).unwrap();
        let f = fit_wave_pattern(&pts).unwrap();
        assert!((f.wavelength / 138e-9 - 1.0).abs() < 1e-6, "{}", f.wavelength);
        assert!((f.rotation - 0.840).abs() < 1e-6);
        assert!((f.amplitude - 0.76).abs() < 1e-6);
        assert!(wrap_phase(f.phase_origin - 0.7).abs() < 1e-6);
        assert!(f.residual_rms < 1e-10);
    }

    #[test]
    fn planted_zero_rotation_is_along_z() {
        let field = PatternField::new(138e-9, 0.0, 0.2, 0.8).unwrap();
        let pts = pattern_grid_scan(&field, 0.8, 200e-9, 20, None, 0).unwrap();
        let f = fit_wave_pattern(&pts).unwrap();
        assert!(f.rotation.abs() < 1e-8);
    }

    #[test]
    fn negative_rotation_and_folding() {
        let field = PatternField::new(150e-9, -0.5, -1.0, 0.9).unwrap();
        let pts = pattern_grid_scan(&field, 0.9, 200e-9, 20, None, 0).unwrap();
        let f = fit_wave_pattern(&pts).unwrap();
        assert!((f.rotation + 0.5).abs() < 1e-6);
        assert!(f.rotation > -PI / 2.0 && f.rotation <= PI / 2.0);
    }

    #[test]
    fn too_few_points_or_short_extent() {
        let field = PatternField::new(138e-9, 0.840, 0.0, 1.0).unwrap();
        let pts = pattern_grid_scan(&field, 1.0, 200e-9, 5, None, 0).unwrap();
        assert!(matches!(fit_wave_pattern(&pts), Err(Error::InsufficientData(_))));
        let short = pattern_grid_scan(&field, 1.0, 30e-9, 8, None, 0).unwrap();
        assert!(fit_wave_pattern(&short).is_err());
    }
}
