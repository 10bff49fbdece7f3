//! Truncated spin ⊗ Fock space.
//!
//! Basis ordering is spin-major: the first `fock_dim` amplitudes belong to
//! `|↓⟩`, the next `fock_dim` to `|↑⟩`, each block in ascending Fock number.
//! The spin convention is `σ_z|↓⟩ = −|↓⟩`, so `P↓ = (1 − ⟨σ_z⟩)/2`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::linalg::{expm_antihermitian, expm_hermitian};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Reduced Planck constant (CODATA 2018), J·s.
pub const HBAR: f64 = 1.054571817e-34;
/// Atomic mass unit (CODATA 2018), kg.
pub const AMU: f64 = 1.66053906660e-27;
/// Default ion mass: 25 u.
pub const ION_MASS_AMU: f64 = 25.0;

/// Tolerance on the imaginary part of a Hermitian expectation value.
const HERMITIAN_IM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilbertSpec {
    fock_dim: usize,
    tail_tol: f64,
}

impl HilbertSpec {
    pub fn new(fock_dim: usize, tail_tol: f64) -> Result<Self> {
        if fock_dim < 2 {
            return Err(Error::param("fock_dim", format!("{fock_dim} < 2")));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::param("tail_tol", format!("{tail_tol} not in (0, 1)")));
        }
        Ok(Self { fock_dim, tail_tol })
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// Full spin ⊗ motion dimension.
    pub fn dim(&self) -> usize {
        2 * self.fock_dim
    }

    /// Number of Fock levels making up the "top 5%" used by truncation checks.
    pub fn top_levels(&self) -> usize {
        ((self.fock_dim as f64) * 0.05).ceil().max(1.0) as usize
    }

    /// Flat index of `|spin, n⟩`.
    pub fn index(&self, spin: Spin, n: usize) -> usize {
        spin.block() * self.fock_dim + n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Down,
    Up,
}

impl Spin {
    fn block(self) -> usize {
        match self {
            Spin::Down => 0,
            Spin::Up => 1,
        }
    }

    /// Eigenvalue of σ_z.
    pub fn sigma_z(self) -> f64 {
        match self {
            Spin::Down => -1.0,
            Spin::Up => 1.0,
        }
    }
}

/// Harmonic mode of the ion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    /// Angular frequency ω_m, rad/s.
    pub freq: f64,
    /// Mean thermal occupation.
    pub n_th: f64,
    /// Angle between the mode axis and z, rad.
    pub mode_angle: f64,
}

impl ModeParams {
    pub fn new(freq: f64, n_th: f64, mode_angle: f64) -> Result<Self> {
        if !(freq > 0.0) {
            return Err(Error::param("mode.freq", format!("{freq} must be > 0")));
        }
        if !(n_th >= 0.0) {
            return Err(Error::param("mode.n_th", format!("{n_th} must be >= 0")));
        }
        if mode_angle.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::param(
                "mode.mode_angle",
                format!("|{mode_angle}| exceeds pi/2"),
            ));
        }
        Ok(Self {
            freq,
            n_th,
            mode_angle,
        })
    }

    /// Motional period 2π/ω_m, s.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.freq
    }
}

/// Spin frame. Dynamics run in the drive's rotating frame, so only the
/// detuning δ = ω_drive − ω_z enters the propagators.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameParams {
    pub spin_freq: f64,
    pub detuning: f64,
}

/// Drive field; `eta = 0` is a motion-insensitive (MW or collinear) drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    /// Rabi rate Ω, rad/s.
    pub rabi: f64,
    /// Drive phase φ, rad.
    pub phase: f64,
    /// Lamb-Dicke parameter η.
    pub eta: f64,
}

impl DriveParams {
    pub fn new(rabi: f64, phase: f64, eta: f64) -> Result<Self> {
        if !(rabi >= 0.0) {
            return Err(Error::param("drive.rabi", format!("{rabi} must be >= 0")));
        }
        if !(eta >= 0.0) {
            return Err(Error::param("drive.eta", format!("{eta} must be >= 0")));
        }
        Ok(Self { rabi, phase, eta })
    }
}

/// Coherent amplitude α = |α| e^{iϑ0}.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoherentAmp {
    pub magnitude: f64,
    pub phase: f64,
}

impl CoherentAmp {
    pub fn new(magnitude: f64, phase: f64) -> Result<Self> {
        if !(magnitude >= 0.0) {
            return Err(Error::param("alpha", format!("|alpha| = {magnitude} < 0")));
        }
        Ok(Self { magnitude, phase })
    }

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }

    /// Smallest truncation accepted for this amplitude: 4|α|² + 20.
    pub fn required_fock_dim(&self) -> usize {
        (4.0 * self.magnitude * self.magnitude + 20.0).ceil() as usize
    }
}

/// Squeezing parameter ζ = |ζ| e^{iζ0}.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SqueezeParam {
    pub magnitude: f64,
    pub phase: f64,
}

impl SqueezeParam {
    pub fn new(magnitude: f64, phase: f64) -> Result<Self> {
        if !(magnitude >= 0.0) {
            return Err(Error::param("zeta", format!("|zeta| = {magnitude} < 0")));
        }
        Ok(Self { magnitude, phase })
    }

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }

    /// Smallest truncation accepted for this squeezing: 20 e^{2|ζ|}.
    pub fn required_fock_dim(&self) -> usize {
        (20.0 * (2.0 * self.magnitude).exp()).ceil() as usize
    }
}

/// SI conversion for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitScale {
    pub hbar: f64,
    pub mass: f64,
    /// √(ħ/(2mω)), m.
    pub x_zpf: f64,
    /// √(ħmω/2), kg·m/s.
    pub p_zpf: f64,
}

impl UnitScale {
    pub fn new(hbar: f64, mass: f64, freq: f64) -> Result<Self> {
        if !(hbar > 0.0 && mass > 0.0 && freq > 0.0) {
            return Err(Error::param(
                "units",
                format!("hbar={hbar}, mass={mass}, freq={freq} must all be > 0"),
            ));
        }
        Ok(Self {
            hbar,
            mass,
            x_zpf: (hbar / (2.0 * mass * freq)).sqrt(),
            p_zpf: (hbar * mass * freq / 2.0).sqrt(),
        })
    }

    /// CODATA constants, 25 u ion.
    pub fn magnesium25(freq: f64) -> Result<Self> {
        Self::new(HBAR, ION_MASS_AMU * AMU, freq)
    }
}

/// Lowering, raising and number matrices on the Fock space.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub n: CMatrix,
}

pub fn build_mode_operators(spec: &HilbertSpec) -> Result<ModeOperators> {
    let dim = spec.fock_dim;
    if dim < 2 {
        return Err(Error::param("fock_dim", format!("{dim} < 2")));
    }
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let a_dag = a.adjoint();
    let n = &a_dag * &a;
    Ok(ModeOperators { a, a_dag, n })
}

/// Dimensionless position quadrature `a + a†`.
pub fn position_quadrature(spec: &HilbertSpec) -> CMatrix {
    let mut x = CMatrix::zeros(spec.fock_dim, spec.fock_dim);
    for n in 1..spec.fock_dim {
        let s = Complex64::new((n as f64).sqrt(), 0.0);
        x[(n - 1, n)] = s;
        x[(n, n - 1)] = s;
    }
    x
}

/// `C(η) = exp[iη(a + a†)]` on the truncated space.
pub fn coupling_operator(eta: f64, spec: &HilbertSpec) -> Result<CMatrix> {
    if !(eta >= 0.0) {
        return Err(Error::param("eta", format!("{eta} must be >= 0")));
    }
    if eta == 0.0 {
        return Ok(CMatrix::identity(spec.fock_dim, spec.fock_dim));
    }
    // exp(-i X t) with t = -η
    Ok(expm_hermitian(&position_quadrature(spec), -eta))
}

/// `D(α) = exp(α a† − α* a)`.
pub fn displacement_operator(alpha: CoherentAmp, spec: &HilbertSpec) -> Result<CMatrix> {
    let required = alpha.required_fock_dim();
    if spec.fock_dim < required {
        return Err(Error::TruncationRule {
            what: "coherent displacement",
            required,
            available: spec.fock_dim,
        });
    }
    if alpha.magnitude == 0.0 {
        return Ok(CMatrix::identity(spec.fock_dim, spec.fock_dim));
    }
    let ops = build_mode_operators(spec)?;
    let a = alpha.value();
    let g = &ops.a_dag * a - &ops.a * a.conj();
    Ok(expm_antihermitian(&g))
}

/// `S(ζ) = exp(½(ζ* a² − ζ a†²))`.
pub fn squeeze_operator(zeta: SqueezeParam, spec: &HilbertSpec) -> Result<CMatrix> {
    let required = zeta.required_fock_dim();
    if spec.fock_dim < required {
        return Err(Error::TruncationRule {
            what: "squeezing",
            required,
            available: spec.fock_dim,
        });
    }
    if zeta.magnitude == 0.0 {
        return Ok(CMatrix::identity(spec.fock_dim, spec.fock_dim));
    }
    let ops = build_mode_operators(spec)?;
    let z = zeta.value();
    let a2 = &ops.a * &ops.a;
    let ad2 = &ops.a_dag * &ops.a_dag;
    let g = (a2 * z.conj() - ad2 * z) * Complex64::new(0.5, 0.0);
    Ok(expm_antihermitian(&g))
}

/// Pure state on spin ⊗ Fock(N).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinMotionState {
    amplitudes: CVector,
    fock_dim: usize,
}

impl SpinMotionState {
    /// Basis state `|spin⟩ ⊗ |fock_index⟩`.
    pub fn basis(spin: Spin, fock_index: usize, spec: &HilbertSpec) -> Result<Self> {
        if fock_index >= spec.fock_dim {
            return Err(Error::IndexOutOfRange {
                index: fock_index,
                dim: spec.fock_dim,
            });
        }
        let mut amplitudes = CVector::zeros(spec.dim());
        amplitudes[spec.index(spin, fock_index)] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes,
            fock_dim: spec.fock_dim,
        })
    }

    pub fn from_amplitudes(amplitudes: CVector, spec: &HilbertSpec) -> Result<Self> {
        if amplitudes.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            fock_dim: spec.fock_dim,
        })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut CVector {
        &mut self.amplitudes
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Applies an operator on the full spin ⊗ motion space.
    pub fn apply(&self, op: &CMatrix) -> Result<Self> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: op.nrows(),
            });
        }
        Ok(Self {
            amplitudes: op * &self.amplitudes,
            fock_dim: self.fock_dim,
        })
    }

    /// Applies `I_spin ⊗ op`.
    pub fn apply_motion(&self, op: &CMatrix) -> Result<Self> {
        let n = self.fock_dim;
        if op.nrows() != n || op.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: op.nrows(),
            });
        }
        let mut out = CVector::zeros(2 * n);
        for block in 0..2 {
            let part = op * self.amplitudes.rows(block * n, n);
            out.rows_mut(block * n, n).copy_from(&part);
        }
        Ok(Self {
            amplitudes: out,
            fock_dim: n,
        })
    }

    pub fn down_block(&self) -> nalgebra::DVectorView<'_, Complex64> {
        self.amplitudes.rows(0, self.fock_dim)
    }

    pub fn up_block(&self) -> nalgebra::DVectorView<'_, Complex64> {
        self.amplitudes.rows(self.fock_dim, self.fock_dim)
    }

    pub fn p_down(&self) -> f64 {
        self.down_block().iter().map(|c| c.norm_sqr()).sum::<f64>() / self.norm_sqr()
    }

    pub fn sigma_z(&self) -> f64 {
        1.0 - 2.0 * self.p_down()
    }

    /// Fock populations traced over spin.
    pub fn fock_populations(&self) -> Vec<f64> {
        let n = self.fock_dim;
        (0..n)
            .map(|k| self.amplitudes[k].norm_sqr() + self.amplitudes[n + k].norm_sqr())
            .collect()
    }

    pub fn mean_n(&self) -> f64 {
        self.fock_populations()
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// `⟨a⟩` traced over spin.
    pub fn mean_a(&self) -> Complex64 {
        let n = self.fock_dim;
        let mut acc = Complex64::new(0.0, 0.0);
        for block in 0..2 {
            let off = block * n;
            for k in 1..n {
                acc += self.amplitudes[off + k - 1].conj()
                    * self.amplitudes[off + k]
                    * (k as f64).sqrt();
            }
        }
        acc
    }

    /// `⟨a²⟩` traced over spin.
    pub fn mean_a2(&self) -> Complex64 {
        let n = self.fock_dim;
        let mut acc = Complex64::new(0.0, 0.0);
        for block in 0..2 {
            let off = block * n;
            for k in 2..n {
                acc += self.amplitudes[off + k - 2].conj()
                    * self.amplitudes[off + k]
                    * ((k * (k - 1)) as f64).sqrt();
            }
        }
        acc
    }

    /// Quadrature moments in zero-point units (vacuum variance = 1).
    pub fn quadrature_moments(&self) -> QuadratureMoments {
        let a = self.mean_a();
        let a2 = self.mean_a2();
        let nbar = self.mean_n();
        let mean_x = 2.0 * a.re;
        let mean_p = 2.0 * a.im;
        let x2 = 2.0 * a2.re + 2.0 * nbar + 1.0;
        let p2 = -2.0 * a2.re + 2.0 * nbar + 1.0;
        QuadratureMoments {
            mean_x,
            mean_p,
            var_x: x2 - mean_x * mean_x,
            var_p: p2 - mean_p * mean_p,
        }
    }
}

/// Dimensionless quadrature statistics, `X = a + a†`, `P = i(a† − a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureMoments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
}

pub fn make_initial_state(spin: Spin, fock_index: usize, spec: &HilbertSpec) -> Result<SpinMotionState> {
    SpinMotionState::basis(spin, fock_index, spec)
}

/// Draws a Fock index from the thermal law `p(n) = n_th^n / (1 + n_th)^{n+1}`.
pub fn thermal_sample_with<R: Rng + ?Sized>(n_th: f64, rng: &mut R) -> usize {
    if n_th <= 0.0 {
        return 0;
    }
    // Geometric counts failures before the first success.
    let geo = Geometric::new(1.0 / (1.0 + n_th)).expect("success probability in (0, 1]");
    geo.sample(rng) as usize
}

pub fn thermal_sample(n_th: f64, rng_seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    thermal_sample_with(n_th, &mut rng)
}

/// Thermal weights `(n, p(n))`, truncated once the remaining tail falls
/// below `tail` (renormalised).
pub fn thermal_weights(n_th: f64, max_levels: usize, tail: f64) -> Vec<(usize, f64)> {
    if n_th <= 0.0 {
        return vec![(0, 1.0)];
    }
    let q = n_th / (1.0 + n_th);
    let mut out = Vec::new();
    let mut p = 1.0 - q;
    let mut covered = 0.0;
    for n in 0..max_levels {
        out.push((n, p));
        covered += p;
        if 1.0 - covered < tail {
            break;
        }
        p *= q;
    }
    for w in out.iter_mut() {
        w.1 /= covered;
    }
    out
}

/// `⟨ψ|O|ψ⟩` for a full-space operator.
pub fn expect(observable: &CMatrix, state: &SpinMotionState) -> Result<Complex64> {
    if observable.nrows() != state.dim() || observable.ncols() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: observable.nrows(),
        });
    }
    let v = observable * state.amplitudes();
    Ok(crate::linalg::inner(state.amplitudes(), &v))
}

/// Real expectation of a Hermitian observable.
pub fn expect_real(observable: &CMatrix, state: &SpinMotionState) -> Result<f64> {
    let z = expect(observable, state)?;
    if z.im.abs() >= HERMITIAN_IM_TOL {
        return Err(Error::NotHermitian(z.im));
    }
    Ok(z.re)
}

/// `I_spin ⊗ op`.
pub fn lift_motion(op: &CMatrix) -> CMatrix {
    let n = op.nrows();
    let mut full = CMatrix::zeros(2 * n, 2 * n);
    full.view_mut((0, 0), (n, n)).copy_from(op);
    full.view_mut((n, n), (n, n)).copy_from(op);
    full
}

/// `σ_z ⊗ I_motion` with `σ_z|↓⟩ = −|↓⟩`.
pub fn sigma_z_operator(spec: &HilbertSpec) -> CMatrix {
    let n = spec.fock_dim;
    let diag = DVector::from_fn(2 * n, |i, _| {
        Complex64::new(if i < n { -1.0 } else { 1.0 }, 0.0)
    });
    CMatrix::from_diagonal(&diag)
}

/// `I_spin ⊗ a†a`.
pub fn number_operator(spec: &HilbertSpec) -> CMatrix {
    let n = spec.fock_dim;
    let diag = DVector::from_fn(2 * n, |i, _| Complex64::new((i % n) as f64, 0.0));
    CMatrix::from_diagonal(&diag)
}

/// SI quadratures: `X = x_zpf ⟨a + a†⟩` (m), `P = p_zpf ⟨i(a† − a)⟩` (kg·m/s).
pub fn quadratures_si(state: &SpinMotionState, units: &UnitScale) -> (f64, f64) {
    let a = state.mean_a();
    (2.0 * units.x_zpf * a.re, 2.0 * units.p_zpf * a.im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    pub tail_population: f64,
    pub top_levels: usize,
    pub tail_tol: f64,
    pub passed: bool,
}

pub fn check_truncation(state: &SpinMotionState, spec: &HilbertSpec) -> TruncationReport {
    let top = spec.top_levels();
    let pops = state.fock_populations();
    let tail: f64 = pops[pops.len().saturating_sub(top)..].iter().sum();
    TruncationReport {
        tail_population: tail,
        top_levels: top,
        tail_tol: spec.tail_tol,
        passed: tail < spec.tail_tol,
    }
}

impl TruncationReport {
    pub fn into_result(self) -> Result<()> {
        if self.passed {
            Ok(())
        } else {
            Err(Error::TruncationLeak {
                tail: self.tail_population,
                tol: self.tail_tol,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(n: usize) -> HilbertSpec {
        HilbertSpec::new(n, 1e-4).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(HilbertSpec::new(1, 1e-4).is_err());
        assert!(HilbertSpec::new(4, 0.0).is_err());
        assert!(HilbertSpec::new(4, 1.0).is_err());
        assert!(HilbertSpec::new(2, 0.5).is_ok());
    }

    #[test]
    fn lowering_operator_two_levels() {
        let ops = build_mode_operators(&spec(2)).unwrap();
        assert_eq!(ops.a[(0, 1)], Complex64::new(1.0, 0.0));
        let nonzero = ops.a.iter().filter(|c| c.norm() > 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn number_diagonal() {
        let ops = build_mode_operators(&spec(5)).unwrap();
        for k in 0..5 {
            assert_abs_diff_eq!(ops.n[(k, k)].re, k as f64, epsilon = 1e-14);
        }
        assert_eq!(ops.a_dag, ops.a.adjoint());
    }

    #[test]
    fn commutator_truncation_artifact() {
        let dim = 7;
        let ops = build_mode_operators(&spec(dim)).unwrap();
        let comm = &ops.a * &ops.a_dag - &ops.a_dag * &ops.a;
        for i in 0..dim {
            for j in 0..dim {
                let expected = match (i == j, i == dim - 1) {
                    (true, true) => -((dim - 1) as f64),
                    (true, false) => 1.0,
                    _ => 0.0,
                };
                assert_abs_diff_eq!(comm[(i, j)].re, expected, epsilon = 1e-12);
                assert_abs_diff_eq!(comm[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn coupling_identity_at_zero() {
        let c = coupling_operator(0.0, &spec(10)).unwrap();
        assert_eq!(c, CMatrix::identity(10, 10));
        assert!(coupling_operator(-0.1, &spec(10)).is_err());
    }

    #[test]
    fn coupling_low_elements() {
        let c = coupling_operator(0.4, &spec(40)).unwrap();
        assert_abs_diff_eq!(c[(0, 0)].re, (-0.08f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(c[(0, 0)].im, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c[(1, 0)].re, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c[(1, 0)].im, 0.4 * (-0.08f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(c[(1, 0)].im, 0.36925, epsilon = 1e-5);
    }

    #[test]
    fn displacement_rules() {
        let s = spec(20);
        assert_eq!(
            displacement_operator(CoherentAmp::default(), &s).unwrap(),
            CMatrix::identity(20, 20)
        );
        let err = displacement_operator(CoherentAmp::new(3.0, 0.0).unwrap(), &s).unwrap_err();
        assert!(matches!(err, Error::TruncationRule { required: 56, .. }));
    }

    #[test]
    fn coherent_state_poisson() {
        let s = spec(80);
        let d = displacement_operator(CoherentAmp::new(3.0, 0.7).unwrap(), &s).unwrap();
        let psi = make_initial_state(Spin::Down, 0, &s).unwrap().apply_motion(&d).unwrap();
        assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(psi.mean_n(), 9.0, epsilon = 1e-6);
        let pops = psi.fock_populations();
        let mut poisson = (-9.0f64).exp();
        for (n, p) in pops.iter().enumerate().take(30) {
            assert_abs_diff_eq!(*p, poisson, epsilon = 1e-10);
            poisson *= 9.0 / (n as f64 + 1.0);
        }
    }

    #[test]
    fn squeezed_vacuum_even_and_mean() {
        let z = SqueezeParam::new(1.0, 0.0).unwrap();
        let s = spec(z.required_fock_dim());
        let sq = squeeze_operator(z, &s).unwrap();
        let psi = make_initial_state(Spin::Down, 0, &s).unwrap().apply_motion(&sq).unwrap();
        let pops = psi.fock_populations();
        for (n, p) in pops.iter().enumerate() {
            if n % 2 == 1 {
                assert!(*p < 1e-20, "odd level {n} populated: {p}");
            }
        }
        assert_abs_diff_eq!(psi.mean_n(), 1f64.sinh().powi(2), epsilon = 1e-6);
        assert!(squeeze_operator(z, &spec(100)).is_err());
        assert_eq!(
            squeeze_operator(SqueezeParam::default(), &spec(30)).unwrap(),
            CMatrix::identity(30, 30)
        );
    }

    #[test]
    fn basis_state_and_range() {
        let s = spec(6);
        let psi = make_initial_state(Spin::Down, 0, &s).unwrap();
        assert_eq!(psi.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert_eq!(psi.amplitudes().iter().filter(|c| c.norm() > 0.0).count(), 1);
        assert!(matches!(
            make_initial_state(Spin::Up, 6, &s),
            Err(Error::IndexOutOfRange { .. })
        ));
        let up2 = make_initial_state(Spin::Up, 2, &s).unwrap();
        assert_eq!(up2.amplitudes()[s.index(Spin::Up, 2)], Complex64::new(1.0, 0.0));
        assert_eq!(s.index(Spin::Up, 2), 8);
    }

    #[test]
    fn thermal_sampling() {
        assert!((0..50).all(|seed| thermal_sample(0.0, seed) == 0));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mean = (0..n).map(|_| thermal_sample_with(0.15, &mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 0.15).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn thermal_weights_normalised() {
        let w = thermal_weights(0.15, 100, 1e-9);
        let total: f64 = w.iter().map(|x| x.1).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let mean: f64 = w.iter().map(|(n, p)| *n as f64 * p).sum();
        assert_abs_diff_eq!(mean, 0.15, epsilon = 1e-7);
    }

    #[test]
    fn expectations() {
        let s = spec(6);
        let down = make_initial_state(Spin::Down, 0, &s).unwrap();
        assert_abs_diff_eq!(expect_real(&sigma_z_operator(&s), &down).unwrap(), -1.0);
        assert_abs_diff_eq!(down.sigma_z(), -1.0);
        let up2 = make_initial_state(Spin::Up, 2, &s).unwrap();
        assert_abs_diff_eq!(expect_real(&number_operator(&s), &up2).unwrap(), 2.0);
        let ops = build_mode_operators(&s).unwrap();
        assert_abs_diff_eq!(expect_real(&lift_motion(&ops.n), &up2).unwrap(), 2.0, epsilon = 1e-12);
        assert!(matches!(
            expect(&ops.n, &up2),
            Err(Error::DimensionMismatch { .. })
        ));
        // i·I is not Hermitian
        let ii = CMatrix::identity(12, 12) * Complex64::i();
        assert!(matches!(expect_real(&ii, &up2), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn zero_point_scales() {
        let u = UnitScale::magnesium25(2.0 * std::f64::consts::PI * 1.3e6).unwrap();
        assert_abs_diff_eq!(u.x_zpf * 1e9, 12.47, epsilon = 0.01);
        assert_abs_diff_eq!(u.p_zpf * 1e27, 4.228, epsilon = 0.005);
        assert!(((u.x_zpf * u.p_zpf) / (HBAR / 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn si_quadratures_of_coherent_states() {
        let omega = 2.0 * std::f64::consts::PI * 1.3e6;
        let u = UnitScale::magnesium25(omega).unwrap();
        let s = spec(200);
        let vac = make_initial_state(Spin::Down, 0, &s).unwrap();
        assert_eq!(quadratures_si(&vac, &u), (0.0, 0.0));
        let d = displacement_operator(CoherentAmp::new(6.5, 0.0).unwrap(), &s).unwrap();
        let (x, p) = quadratures_si(&vac.apply_motion(&d).unwrap(), &u);
        assert_abs_diff_eq!(x * 1e9, 2.0 * 12.47 * 6.5, epsilon = 0.2);
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-35);
        let d = displacement_operator(CoherentAmp::new(6.5, std::f64::consts::FRAC_PI_2).unwrap(), &s).unwrap();
        let (_, p) = quadratures_si(&vac.apply_motion(&d).unwrap(), &u);
        assert_abs_diff_eq!(p.abs() * 1e27, 55.0, epsilon = 0.1);
    }

    #[test]
    fn truncation_reports() {
        let s12 = spec(12);
        let vac = make_initial_state(Spin::Down, 0, &s12).unwrap();
        assert!(check_truncation(&vac, &s12).passed);
        // Build D(3)|0⟩ at fock_dim 80 and project onto 12 levels for the failing case.
        let s80 = spec(80);
        let d = displacement_operator(CoherentAmp::new(3.0, 0.0).unwrap(), &s80).unwrap();
        let coh = make_initial_state(Spin::Down, 0, &s80).unwrap().apply_motion(&d).unwrap();
        assert!(check_truncation(&coh, &s80).passed);
        let mut amps = CVector::zeros(24);
        for k in 0..12 {
            amps[k] = coh.amplitudes()[k];
        }
        let norm = amps.norm();
        amps /= Complex64::new(norm, 0.0);
        let small = SpinMotionState::from_amplitudes(amps, &s12).unwrap();
        let report = check_truncation(&small, &s12);
        assert!(!report.passed, "tail {}", report.tail_population);
        assert!(report.into_result().is_err());
    }
}
