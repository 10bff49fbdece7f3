//! Small dense helpers on top of nalgebra.

use crate::{CMatrix, CVector, Complex64};

/// `exp(-i * h * t)` for Hermitian `h`, via eigendecomposition.
///
/// Every unitary in this crate is generated by a Hermitian matrix, so the
/// result is unitary to machine precision regardless of truncation.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * t);
        for x in scaled.column_mut(j).iter_mut() {
            *x *= phase;
        }
    }
    &scaled * v.adjoint()
}

/// `exp(g)` for anti-Hermitian `g` (`g = -i H`).
pub fn expm_antihermitian(g: &CMatrix) -> CMatrix {
    // g = -i H  =>  H = i g
    let h = g * Complex64::i();
    let h = hermitize(&h);
    expm_hermitian(&h, 1.0)
}

/// Symmetrise away rounding noise: `(m + m†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Max-abs deviation of `u† u` from the identity, restricted to the leading
/// `k × k` block.
pub fn unitarity_defect(u: &CMatrix, k: usize) -> f64 {
    let p = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - target).norm());
        }
    }
    worst
}

/// Max-abs entry difference on the leading `k × k` block.
pub fn max_abs_diff_block(a: &CMatrix, b: &CMatrix, k: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// `⟨u|v⟩`.
pub fn inner(u: &CVector, v: &CVector) -> Complex64 {
    u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}
