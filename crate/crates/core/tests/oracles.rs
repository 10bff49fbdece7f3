use ionstrobe_core::calib::derive_lamb_dicke;
use ionstrobe_core::hilbert::{
    coupling_operator, displacement_operator, quadratures_si, squeeze_operator, CoherentAmp,
    HilbertSpec, Spin, SpinMotionState, SqueezeParam, UnitScale, AMU, HBAR,
};
use ionstrobe_core::Complex64;
use std::f64::consts::PI;

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Generalized Laguerre polynomial `L_n^{(k)}(x)` by the three-term recurrence.
fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, 1.0 + k - x);
    for m in 1..n {
        let m = m as f64;
        let next = ((2.0 * m + 1.0 + k - x) * cur - (m + k) * prev) / (m + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `⟨m| exp(iη(a + a†)) |n⟩` for the untruncated oscillator.
fn coupling_element(eta: f64, m: usize, n: usize) -> Complex64 {
    let (lo, hi) = (m.min(n), m.max(n));
    let d = hi - lo;
    let mag = (-0.5 * eta * eta).exp()
        * eta.powi(d as i32)
        * (0.5 * (ln_factorial(lo) - ln_factorial(hi))).exp()
        * laguerre(lo, d, eta * eta);
    Complex64::i().powi(d as i32) * mag
}

#[test]
fn coupling_matches_laguerre_formula() {
    let spec = HilbertSpec::new(60, 1e-4).unwrap();
    for eta in [0.18, 0.23, 0.40] {
        let c = coupling_operator(eta, &spec).unwrap();
        let mut worst: f64 = 0.0;
        for m in 0..48 {
            for n in 0..48 {
                worst = worst.max((c[(m, n)] - coupling_element(eta, m, n)).norm());
            }
        }
        assert!(worst < 1e-8, "eta {eta}: {worst:e}");
    }
}

fn vacuum(spec: &HilbertSpec) -> SpinMotionState {
    SpinMotionState::basis(Spin::Down, 0, spec).unwrap()
}

#[test]
fn coherent_state_statistics() {
    let spec = HilbertSpec::new(60, 1e-4).unwrap();
    let d = displacement_operator(CoherentAmp::new(3.0, 0.0).unwrap(), &spec).unwrap();
    let s = vacuum(&spec).apply_motion(&d).unwrap();
    assert!((s.mean_n() - 9.0).abs() < 1e-6, "{}", s.mean_n());
    let pops = s.fock_populations();
    for (n, p) in pops.iter().enumerate().take(30) {
        let poisson = (-9.0f64 + n as f64 * 9.0f64.ln() - ln_factorial(n)).exp();
        assert!((p - poisson).abs() < 1e-10, "n={n}");
    }
    let q = s.quadrature_moments();
    assert!((q.mean_x - 6.0).abs() < 1e-9);
    assert!(q.mean_p.abs() < 1e-9);
    assert!((q.var_x - 1.0).abs() < 1e-8 && (q.var_p - 1.0).abs() < 1e-8);
}

#[test]
fn squeezed_vacuum_against_bogoliubov() {
    let spec = HilbertSpec::new(160, 1e-4).unwrap();
    let r: f64 = 1.0;
    for zeta0 in [0.0, PI / 3.0, PI / 2.0, PI] {
        let sq = squeeze_operator(SqueezeParam::new(r, zeta0).unwrap(), &spec).unwrap();
        let s = vacuum(&spec).apply_motion(&sq).unwrap();
        assert!((s.mean_n() - r.sinh().powi(2)).abs() < 1e-6, "{}", s.mean_n());
        let q = s.quadrature_moments();
        let var_x = (2.0 * r).cosh() - (2.0 * r).sinh() * zeta0.cos();
        let var_p = (2.0 * r).cosh() + (2.0 * r).sinh() * zeta0.cos();
        assert!((q.var_x - var_x).abs() < 1e-6, "{zeta0}: {} vs {var_x}", q.var_x);
        assert!((q.var_p - var_p).abs() < 1e-6);
        // minimum uncertainty only on the principal axes
        if zeta0 == 0.0 || zeta0 == PI {
            assert!((q.var_x * q.var_p - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn uncertainty_product_in_si_units() {
    let spec = HilbertSpec::new(160, 1e-4).unwrap();
    let units = UnitScale::magnesium25(2.0 * PI * 1.3e6).unwrap();
    let sq = squeeze_operator(SqueezeParam::new(1.0, 0.0).unwrap(), &spec).unwrap();
    let s = vacuum(&spec).apply_motion(&sq).unwrap();
    let q = s.quadrature_moments();
    let vx = q.var_x * units.x_zpf.powi(2);
    let vp = q.var_p * units.p_zpf.powi(2);
    let target = (HBAR / 2.0).powi(2);
    assert!((vx * vp / target - 1.0).abs() < 1e-6);
    let (x, p) = quadratures_si(&s, &units);
    assert!(x.abs() < 1e-20 && p.abs() < 1e-40);
}

#[test]
fn demo_unit_scale() {
    let omega = 2.0 * PI * 1.3e6;
    let u = UnitScale::magnesium25(omega).unwrap();
    assert!((u.x_zpf * 1e9 - 12.47).abs() < 0.01, "{}", u.x_zpf * 1e9);
    // zN·µs = 1e-27 kg·m/s
    assert!((u.p_zpf * 1e27 - 4.228).abs() < 0.005, "{}", u.p_zpf * 1e27);
    assert!((u.x_zpf * u.p_zpf - HBAR / 2.0).abs() < 1e-12 * HBAR);
    let eta = derive_lamb_dicke(25.0 * AMU, omega, 140e-9, 0.840, HBAR).unwrap();
    assert!((0.35..=0.42).contains(&eta), "{eta}");
}
