//! The first-order stable spline (TC) kernel `K_ij = λ α^max(i,j)`.
//!
//! Besides the dense matrix, the kernel exposes three closed forms that never
//! require factorizing `K` numerically:
//!
//! * `K = U W Uᵀ` where `U` is the unit upper-triangular matrix of ones and
//!   `W` is diagonal (`TriFactor`). `U` is shared by every kernel.
//! * `K⁻¹` is tridiagonal (`TridiagInverse`).
//! * `log det K = n log λ + (n-1) log(1-α) + n(n+1)/2 log α`.
//!
//! Indices in the math are 1-based; every accessor here is 0-based, so
//! `entry(i, j) = λ α^(max(i,j)+1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSplineKernel {
    n: usize,
    alpha: f64,
    lambda: f64,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(
            "alpha",
            format!("must lie in the open interval (0, 1), got {alpha}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(
            "lambda",
            format!("must be positive and finite, got {lambda}"),
        ));
    }
    Ok(())
}

impl StableSplineKernel {
    /// Validates `n >= 1`, `0 < alpha < 1` and `lambda > 0`.
    ///
    /// `alpha = 0` gives the zero matrix and `alpha = 1` a rank-one matrix;
    /// both are rejected.
    pub fn new(n: usize, alpha: f64, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("n", "matrix order must be at least 1"));
        }
        check_alpha(alpha)?;
        check_lambda(lambda)?;
        Ok(Self { n, alpha, lambda })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same `(n, alpha)` with a different scale.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.n, self.alpha, lambda)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.lambda * self.alpha.powi(i.max(j) as i32 + 1)
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let diag: Vec<f64> = (0..self.n).map(|k| self.entry(k, k)).collect();
        DMatrix::from_fn(self.n, self.n, |i, j| diag[i.max(j)])
    }

    /// Diagonal `W` of `K = U W Uᵀ`:
    /// `w_j = λ(α-α²)α^(j-1)` for `j < n` and `w_n = λα^n`.
    pub fn factorize(&self) -> TriFactor {
        let (a, n) = (self.alpha, self.n);
        let base = self.lambda * (a - a * a);
        let mut w: Vec<f64> = (0..n.saturating_sub(1))
            .map(|j| base * a.powi(j as i32))
            .collect();
        w.push(self.lambda * a.powi(n as i32));
        TriFactor { w }
    }

    /// Closed-form tridiagonal `K⁻¹`.
    ///
    /// With `v_j = 1/w_j`, the diagonal is `v_1, v_1+v_2, ..., v_{n-1}+v_n`
    /// and the off-diagonal is `-v_1, ..., -v_{n-1}`. The `v_j` are evaluated
    /// directly as powers of `1/α` so nothing passes through `w_j`, which
    /// would underflow first.
    pub fn inverse(&self) -> Result<TridiagInverse> {
        let (a, n, lambda) = (self.alpha, self.n, self.lambda);
        let log_largest = -(n as f64 - 1.0) * a.ln() - lambda.ln();
        if log_largest > f64::MAX.ln() {
            return Err(Error::Numerical(format!(
                "closed-form inverse overflows: alpha^-(n-1)/lambda = exp({log_largest:.1})"
            )));
        }
        let inv_base = 1.0 / (lambda * (a - a * a));
        let mut v: Vec<f64> = (0..n.saturating_sub(1))
            .map(|j| inv_base * a.powi(-(j as i32)))
            .collect();
        v.push(1.0 / (lambda * a.powi(n as i32)));

        let mut diag = Vec::with_capacity(n);
        diag.push(v[0]);
        diag.extend((1..n).map(|j| v[j - 1] + v[j]));
        let offdiag: Vec<f64> = v[..n - 1].iter().map(|x| -x).collect();

        if diag.iter().chain(&offdiag).any(|x| !x.is_finite()) {
            return Err(Error::Numerical(
                "closed-form inverse overflows the floating-point range".into(),
            ));
        }
        Ok(TridiagInverse { diag, offdiag })
    }

    /// `log det K`, evaluated in the log domain only.
    pub fn log_det(&self) -> f64 {
        let n = self.n as f64;
        n * self.lambda.ln() + (n - 1.0) * (-self.alpha).ln_1p() + 0.5 * n * (n + 1.0) * self.alpha.ln()
    }

    /// `K⁻¹ v` in O(n).
    pub fn solve(&self, v: &[f64]) -> Result<DVector<f64>> {
        self.inverse()?.mul_vec(v)
    }

    /// `K v` in O(n) through the factorization.
    pub fn mul_vec(&self, v: &[f64]) -> Result<DVector<f64>> {
        self.factorize().mul_vec(v)
    }

    /// Checks that each of the first `n-1` columns of `K⁻¹` sums to zero,
    /// relative to the column's largest entry.
    pub fn columns_sum_check(&self) -> Result<bool> {
        let inv = self.inverse()?;
        let n = self.n;
        Ok((0..n.saturating_sub(1)).all(|j| {
            let col = inv.column(j);
            let sum: f64 = col.iter().sum();
            let scale = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            sum.abs() <= 1e-9 * scale
        }))
    }
}

/// Dense `n x n` kernel matrix.
pub fn build_kernel(n: usize, alpha: f64, lambda: f64) -> Result<DMatrix<f64>> {
    Ok(StableSplineKernel::new(n, alpha, lambda)?.dense())
}

/// The diagonal `W` of `K = U W Uᵀ`. `U` (all ones on and above the
/// diagonal) is the same for every kernel and is not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriFactor {
    w: Vec<f64>,
}

impl TriFactor {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// `(U W Uᵀ)_ij = Σ_{k >= max(i,j)} w_k`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut tail = vec![0.0; n];
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc += self.w[k];
            tail[k] = acc;
        }
        DMatrix::from_fn(n, n, |i, j| tail[i.max(j)])
    }

    /// `U W Uᵀ v`: prefix sums, scale, suffix sums.
    pub fn mul_vec(&self, v: &[f64]) -> Result<DVector<f64>> {
        let n = self.n();
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: v.len(),
            });
        }
        let mut x = vec![0.0; n];
        let mut acc = 0.0;
        for k in 0..n {
            acc += v[k];
            x[k] = acc * self.w[k];
        }
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc += x[k];
            x[k] = acc;
        }
        Ok(DVector::from_vec(x))
    }

    /// `A U` for an arbitrary `A` with `n` columns: column `j` of the result
    /// is the sum of columns `0..=j` of `A`.
    pub fn right_mul_u(a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = a.clone();
        for j in 1..out.ncols() {
            let prev = out.column(j - 1).clone_owned();
            let mut col = out.column_mut(j);
            col += prev;
        }
        out
    }
}

/// Symmetric tridiagonal matrix holding `K⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagInverse {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagInverse {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.offdiag[i.min(j)],
            _ => 0.0,
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.entry(i, j)).collect()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<DVector<f64>> {
        let n = self.n();
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: v.len(),
            });
        }
        Ok(DVector::from_fn(n, |i, _| {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.offdiag[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.offdiag[i] * v[i + 1];
            }
            s
        }))
    }
}
