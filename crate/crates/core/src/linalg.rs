//! Dense symmetric positive definite helpers shared by the other modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative pivot threshold for the positive definiteness test.
pub const PD_PIVOT_TOL: f64 = 1e-12;

/// Cholesky factorization that also rejects pivots below
/// `PD_PIVOT_TOL` times the corresponding diagonal entry.
///
/// Comparing each pivot to its own diagonal entry keeps the test invariant
/// under symmetric diagonal scaling, which matters for strongly graded
/// matrices such as the stable spline kernel with small `alpha`.
pub fn cholesky(a: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if a.nrows() != a.ncols() || a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let chol = Cholesky::new(a.clone())?;
    let l = chol.l_dirty();
    for k in 0..a.nrows() {
        let pivot = l[(k, k)] * l[(k, k)];
        if !(pivot > PD_PIVOT_TOL * a[(k, k)]) {
            return None;
        }
    }
    Some(chol)
}

pub fn is_positive_definite(a: &DMatrix<f64>) -> bool {
    cholesky(a).is_some()
}

fn require_chol(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    cholesky(a).ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))
}

/// `log det A` through the Cholesky diagonal.
pub fn log_det_spd(a: &DMatrix<f64>) -> Result<f64> {
    let chol = require_chol(a)?;
    let l = chol.l_dirty();
    Ok((0..a.nrows()).map(|k| 2.0 * l[(k, k)].ln()).sum())
}

pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    Ok(require_chol(a)?.solve(b))
}

/// Inverse of a symmetric positive definite matrix.
///
/// The matrix is equilibrated to unit diagonal first; the result is
/// symmetrized.
pub fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let scale: Vec<f64> = (0..n).map(|i| a[(i, i)].sqrt().recip()).collect();
    if scale.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-positive diagonal".into()));
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * scale[i] * scale[j]);
    let inv = require_chol(&scaled)?.inverse();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        0.5 * (inv[(i, j)] + inv[(j, i)]) * scale[i] * scale[j]
    }))
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
