//! Dense Hermitian linear algebra used for trace norms and as independent
//! reference paths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect()
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m).iter().map(|l| l.abs()).sum()
}

/// `exp(-i t H)` via the eigendecomposition of `H`.
pub fn hermitian_expm(m: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(m.clone());
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| C64::from_polar(1.0, -t * l)),
    ));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

pub fn hermitian_expm_apply(m: &DMatrix<C64>, v: &[C64], t: f64) -> Vec<C64> {
    let out = hermitian_expm(m, t) * DVector::from_column_slice(v);
    out.iter().copied().collect()
}

/// Largest entry of `|M - M^H|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Outer product `a b^H`.
pub fn outer(a: &[C64], b: &[C64]) -> DMatrix<C64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
}

/// Kronecker product of two vectors, first factor slowest.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}
