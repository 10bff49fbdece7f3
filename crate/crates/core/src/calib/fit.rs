//! Weighted fit of `p(φ) = offset + (C/2) cos(φ − φ0)`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::{Error, Result};

pub const MIN_POINTS: usize = 5;
pub const MIN_SPAN: f64 = PI;
pub const MAX_ITERATIONS: usize = 100;
pub const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSample {
    pub phi: f64,
    pub p: f64,
    /// Standard error; all-zero means unweighted.
    pub sem: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineFit {
    pub offset: f64,
    pub contrast: f64,
    /// φ0 in (−π, π].
    pub phase: f64,
    /// Covariance of `(offset, contrast, phase)`.
    pub covariance: [[f64; 3]; 3],
    pub residual_rms: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
    /// False when the contrast is not significant and φ0 is meaningless.
    pub phase_identifiable: bool,
}

impl CosineFit {
    pub fn offset_err(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn contrast_err(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn phase_err(&self) -> f64 {
        self.covariance[2][2].sqrt()
    }

    pub fn model(&self, phi: f64) -> f64 {
        self.offset + 0.5 * self.contrast * (phi - self.phase).cos()
    }
}

/// Wraps into (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Angular coverage of the samples on the circle: 2π minus the widest gap.
pub fn circular_span(phis: &[f64]) -> f64 {
    if phis.len() < 2 {
        return 0.0;
    }
    let mut w: Vec<f64> = phis.iter().map(|p| p.rem_euclid(2.0 * PI)).collect();
    w.sort_by(f64::total_cmp);
    let mut gap = w[0] + 2.0 * PI - w[w.len() - 1];
    for pair in w.windows(2) {
        gap = gap.max(pair[1] - pair[0]);
    }
    2.0 * PI - gap
}

pub fn fit_cosine(samples: &[FitSample]) -> Result<CosineFit> {
    if samples.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least {MIN_POINTS}",
            samples.len()
        )));
    }
    if samples.iter().any(|s| !(s.phi.is_finite() && s.p.is_finite() && s.sem >= 0.0)) {
        return Err(Error::Fit("non-finite sample or negative sem".into()));
    }
    let phis: Vec<f64> = samples.iter().map(|s| s.phi).collect();
    let span = circular_span(&phis);
    if span < MIN_SPAN - 1e-12 {
        return Err(Error::DegenerateSpan {
            span,
            required: MIN_SPAN,
        });
    }
    let weighted = samples.iter().all(|s| s.sem > 0.0);
    let weights: Vec<f64> = samples
        .iter()
        .map(|s| if weighted { 1.0 / (s.sem * s.sem) } else { 1.0 })
        .collect();

    // quadrature projection as the starting point
    let m = samples.len() as f64;
    let mut beta = Vector3::new(
        samples.iter().map(|s| s.p).sum::<f64>() / m,
        2.0 / m * samples.iter().map(|s| s.p * s.phi.cos()).sum::<f64>(),
        2.0 / m * samples.iter().map(|s| s.p * s.phi.sin()).sum::<f64>(),
    );

    let mut iterations = 0;
    let normal = loop {
        if iterations == MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations });
        }
        iterations += 1;
        let mut normal = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for (s, &w) in samples.iter().zip(&weights) {
            let j = Vector3::new(1.0, s.phi.cos(), s.phi.sin());
            let r = s.p - j.dot(&beta);
            normal += w * j * j.transpose();
            rhs += w * r * j;
        }
        let step = normal
            .cholesky()
            .ok_or_else(|| Error::Fit("singular normal matrix".into()))?
            .solve(&rhs);
        beta += step;
        if step.norm() < STEP_TOL {
            break normal;
        }
    };

    let rss: f64 = samples
        .iter()
        .zip(&weights)
        .map(|(s, &w)| {
            let r = s.p - beta[0] - beta[1] * s.phi.cos() - beta[2] * s.phi.sin();
            w * r * r
        })
        .sum();
    let residual_rms = (samples
        .iter()
        .map(|s| (s.p - beta[0] - beta[1] * s.phi.cos() - beta[2] * s.phi.sin()).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let dof = (samples.len() - 3).max(1) as f64;
    let reduced_chi2 = rss / dof;
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular normal matrix".into()))?;
    // absolute weights carry their own scale; unweighted fits use the residuals
    let lin_cov = if weighted { inv } else { inv * reduced_chi2 };

    let (c1, s1) = (beta[1], beta[2]);
    let r = c1.hypot(s1);
    let contrast = 2.0 * r;
    let phase = wrap_phase(s1.atan2(c1));
    let jac = if r > 0.0 {
        Matrix3::new(
            1.0, 0.0, 0.0,
            0.0, 2.0 * c1 / r, 2.0 * s1 / r,
            0.0, -s1 / (r * r), c1 / (r * r),
        )
    } else {
        Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, f64::INFINITY)
    };
    let cov = jac * lin_cov * jac.transpose();
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = cov[(i, k)];
        }
    }
    let contrast_err = if r > 0.0 {
        cov[(1, 1)].sqrt()
    } else {
        2.0 * lin_cov[(1, 1)].max(lin_cov[(2, 2)]).sqrt()
    };
    let phase_identifiable = contrast > 1e-9 && contrast > 3.0 * contrast_err;
    Ok(CosineFit {
        offset: beta[0],
        contrast,
        phase,
        covariance,
        residual_rms,
        reduced_chi2,
        iterations,
        phase_identifiable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSpread {
    pub offset_std: f64,
    pub contrast_std: f64,
    pub phase_std: f64,
    pub replicas: usize,
}

/// Parametric-binomial bootstrap around `fit` at the sample phases.
pub fn bootstrap_cosine(
    samples: &[FitSample],
    fit: &CosineFit,
    shots: usize,
    replicas: usize,
    seed: u64,
) -> Result<BootstrapSpread> {
    if replicas < 2 || shots == 0 {
        return Err(Error::param("bootstrap", "need replicas >= 2 and shots >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floor = 1.0 / (2.0 * shots as f64);
    let mut offs = Vec::with_capacity(replicas);
    let mut cons = Vec::with_capacity(replicas);
    let mut phs = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let draw: Vec<FitSample> = samples
            .iter()
            .map(|s| {
                let p = fit.model(s.phi).clamp(0.0, 1.0);
                let k = Binomial::new(shots as u64, p).expect("p clamped").sample(&mut rng);
                let mean = k as f64 / shots as f64;
                FitSample {
                    phi: s.phi,
                    p: mean,
                    sem: (mean * (1.0 - mean) / shots as f64).sqrt().max(floor),
                }
            })
            .collect();
        let f = fit_cosine(&draw)?;
        offs.push(f.offset);
        cons.push(f.contrast);
        phs.push(fit.phase + wrap_phase(f.phase - fit.phase));
    }
    Ok(BootstrapSpread {
        offset_std: std_dev(&offs),
        contrast_std: std_dev(&cons),
        phase_std: std_dev(&phs),
        replicas,
    })
}

pub(crate) fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
