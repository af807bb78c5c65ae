//! Small dense complex helpers shared by the solvers.

use nalgebra::DMatrix;

use crate::C64;

/// `a^H b`.
pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Phase of `z`, with the phase of an exact zero defined as 0.
pub(crate) fn phase(z: C64) -> f64 {
    if z == C64::new(0.0, 0.0) {
        0.0
    } else {
        z.arg()
    }
}

pub(crate) fn phasor(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues clamped at zero
/// from below (inputs are Gram matrices, so negatives are rounding noise).
pub(crate) fn gram_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = m.clone().symmetric_eigen();
    let values = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    (values, eig.eigenvectors)
}
