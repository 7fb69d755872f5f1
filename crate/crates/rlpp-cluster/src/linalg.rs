//! Small dense-SPD helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Cholesky factorization with a single jitter retry.
///
/// If the factorization fails, `1e-9 * trace/d` is added to the diagonal
/// once; a second failure is reported as an error. Well-conditioned inputs
/// never take the retry path.
pub fn cholesky_jittered(m: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let d = m.nrows();
    let jitter = 1e-9 * m.trace() / d as f64;
    let mut bumped = m.clone();
    for i in 0..d {
        bumped[(i, i)] += jitter;
    }
    Cholesky::new(bumped).ok_or_else(|| Error::NotPositiveDefinite {
        context: context.to_string(),
    })
}

/// Log-determinant of the factored matrix: `2 * sum(ln L_ii)`.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// `x^T a x` for symmetric `a`.
pub fn quad_form(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (a * x).dot(x)
}

/// Extracts the principal submatrix `m[idx, idx]`.
pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// Extracts `v[idx]`.
pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |r, _| v[idx[r]])
}

/// Numerically stable `ln(sum(exp(values)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}
