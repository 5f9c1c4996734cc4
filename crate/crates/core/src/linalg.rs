//! Dense Hermitian linear-algebra helpers used by fidelity and validation.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Eigendecomposition of a Hermitian matrix; returns (eigenvalues, eigenvectors).
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let se = m.clone().symmetric_eigen();
    (se.eigenvalues.iter().copied().collect(), se.eigenvectors)
}

/// sqrt of a numerically PSD Hermitian matrix; eigenvalues below zero are
/// clamped after a tolerance check (they are expected at the 1e-12 scale).
pub fn matrix_sqrt_psd(m: &DMatrix<Complex64>, neg_tol: f64) -> DMatrix<Complex64> {
    let (vals, vecs) = hermitian_eigen(m);
    debug_assert!(
        vals.iter().all(|&l| l >= -neg_tol.max(1e-8)),
        "matrix is not numerically PSD"
    );
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter()
            .map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    hermitian_eigen(m).0.into_iter().fold(f64::INFINITY, f64::min)
}

/// Trace distance (1/2) ||a - b||_1 between Hermitian matrices.
pub fn trace_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let diff = a - b;
    let (vals, _) = hermitian_eigen(&diff);
    0.5 * vals.iter().map(|l| l.abs()).sum::<f64>()
}

/// max |m - m^dagger| entry.
pub fn max_hermiticity_violation(m: &DMatrix<Complex64>) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|v| v.norm()).fold(0.0, f64::max)
}
