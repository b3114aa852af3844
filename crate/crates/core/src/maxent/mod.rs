//! Maximum-entropy completion of partially specified symmetric band matrices.
//!
//! A partial `m`-band matrix fixes `σ_ij` for `|i-j| <= m` and leaves every
//! other entry free. It has a positive definite completion iff every
//! `(m+1) x (m+1)` contiguous band block is positive definite; among those
//! completions there is a unique one of maximal determinant (the central
//! extension), and its inverse vanishes outside the band.
//!
//! Two constructions are provided: the recursive one-step fill
//! ([`central_extension`]) and the banded `L V Lᵀ` factorization of the
//! inverse ([`factored_extension`]). [`oracle`] solves the same problem by
//! direct numerical maximization of `log det`.

pub mod oracle;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub use oracle::{oracle_max_entropy, oracle_max_entropy_from, OracleSettings};

/// Symmetric `n x n` matrix known only on `|i-j| <= m`, stored as the `m+1`
/// diagonals: `diagonals[d][i] = σ_{i, i+d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBand", into = "RawBand")]
pub struct PartialBandMatrix {
    n: usize,
    m: usize,
    diagonals: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawBand {
    n: usize,
    m: usize,
    diagonals: Vec<Vec<f64>>,
}

impl TryFrom<RawBand> for PartialBandMatrix {
    type Error = Error;
    fn try_from(raw: RawBand) -> Result<Self> {
        PartialBandMatrix::new(raw.n, raw.m, raw.diagonals)
    }
}

impl From<PartialBandMatrix> for RawBand {
    fn from(p: PartialBandMatrix) -> Self {
        RawBand {
            n: p.n,
            m: p.m,
            diagonals: p.diagonals,
        }
    }
}

impl PartialBandMatrix {
    pub fn new(n: usize, m: usize, diagonals: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parse("band matrix needs n >= 1".into()));
        }
        if m >= n {
            return Err(Error::Parse(format!(
                "bandwidth m = {m} must be smaller than n = {n}"
            )));
        }
        if diagonals.len() != m + 1 {
            return Err(Error::Parse(format!(
                "expected {} diagonals, got {}",
                m + 1,
                diagonals.len()
            )));
        }
        for (d, diag) in diagonals.iter().enumerate() {
            if diag.len() != n - d {
                return Err(Error::Parse(format!(
                    "diagonal {d} must have {} entries, got {}",
                    n - d,
                    diag.len()
                )));
            }
            if diag.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("diagonal {d} has a non-finite entry")));
            }
        }
        Ok(Self { n, m, diagonals })
    }

    /// Band of `a` of width `m`; `a` is read from its upper triangle.
    pub fn from_dense(a: &DMatrix<f64>, m: usize) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: a.ncols(),
            });
        }
        let m = m.min(n.saturating_sub(1));
        let diagonals = (0..=m)
            .map(|d| (0..n - d).map(|i| a[(i, i + d)]).collect())
            .collect();
        Self::new(n, m, diagonals)
    }

    /// The 1-band moment pattern of the unit-scale TC kernel:
    /// `σ_ij = α^max(i,j)` for `|i-j| <= 1`.
    pub fn tc_moments(n: usize, alpha: f64) -> Result<Self> {
        crate::kernel::check_alpha(alpha)?;
        let m = if n > 1 { 1 } else { 0 };
        let diagonals = (0..=m)
            .map(|d| (0..n - d).map(|i| alpha.powi((i + d) as i32 + 1)).collect())
            .collect();
        Self::new(n, m, diagonals)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn diagonals(&self) -> &[Vec<f64>] {
        &self.diagonals
    }

    /// `Some(σ_ij)` inside the band, `None` for a free entry.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (lo, d) = (i.min(j), i.abs_diff(j));
        (d <= self.m).then(|| self.diagonals[d][lo])
    }

    pub fn is_specified(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.m
    }

    /// Dense matrix with the band filled and `fill` elsewhere.
    pub fn to_dense(&self, fill: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).unwrap_or(fill))
    }

    /// Specified principal submatrix on rows/columns `lo..=hi`. All of it
    /// must lie inside the band.
    fn block(&self, lo: usize, hi: usize) -> DMatrix<f64> {
        let k = hi - lo + 1;
        DMatrix::from_fn(k, k, |i, j| {
            self.get(lo + i, lo + j)
                .expect("block must lie inside the band")
        })
    }

    fn column_segment(&self, lo: usize, hi: usize, j: usize) -> DVector<f64> {
        DVector::from_fn(hi - lo + 1, |i, _| {
            self.get(lo + i, j).expect("segment must lie inside the band")
        })
    }

    /// The `(m+1) x (m+1)` band block starting at row `i` (0-based).
    pub fn band_block(&self, i: usize) -> DMatrix<f64> {
        self.block(i, i + self.m)
    }

    /// 1-based index of the first band block that is not positive definite.
    pub fn first_infeasible_block(&self) -> Option<usize> {
        (0..self.n - self.m)
            .find(|&i| !linalg::is_positive_definite(&self.band_block(i)))
            .map(|i| i + 1)
    }

    pub fn feasible(&self) -> bool {
        self.first_infeasible_block().is_none()
    }

    pub fn check_feasible(&self) -> Result<()> {
        match self.first_infeasible_block() {
            Some(block) => Err(Error::Infeasible { block }),
            None => Ok(()),
        }
    }

    /// Partial matrix on rows/columns `lo..=hi` with bandwidth
    /// `min(m, hi-lo)`.
    pub fn window(&self, lo: usize, hi: usize) -> Self {
        let n = hi - lo + 1;
        let m = self.m.min(n - 1);
        let diagonals = (0..=m)
            .map(|d| self.diagonals[d][lo..lo + n - d].to_vec())
            .collect();
        Self { n, m, diagonals }
    }
}

/// Predicate form of the feasibility test.
pub fn feasible(p: &PartialBandMatrix) -> bool {
    p.feasible()
}

/// Fills the corner pair `(s, t)` of the window `s..=t` of `c`, assuming
/// every other entry of the window is already set.
///
/// `y = A⁻¹ e₁` with `A = c[s..t, s..t]`, then
/// `x = -(1/y₁) Σ_{j=s+1}^{t-1} c[t, j] y_{j-s}`.
fn one_step_fill(c: &DMatrix<f64>, s: usize, t: usize) -> Result<f64> {
    let k = t - s;
    let lead = c.view((s, s), (k, k)).clone_owned();
    let chol = linalg::cholesky(&lead).ok_or_else(|| {
        Error::Numerical(format!("leading block of window {s}..={t} lost definiteness"))
    })?;
    let mut e1 = DVector::zeros(k);
    e1[0] = 1.0;
    let y = chol.solve(&e1);
    let acc: f64 = (1..k).map(|j| c[(t, s + j)] * y[j]).sum();
    Ok(-acc / y[0])
}

/// Central completion of an `n x n` partial matrix of bandwidth `n-2`,
/// i.e. with only the corner pair `(1, n)` free.
pub fn one_step_extension(p: &PartialBandMatrix) -> Result<f64> {
    if p.n < 2 || p.m + 2 != p.n {
        return Err(Error::Parse(format!(
            "one-step extension needs bandwidth n-2, got n = {}, m = {}",
            p.n, p.m
        )));
    }
    p.check_feasible()?;
    one_step_fill(&p.to_dense(0.0), 0, p.n - 1)
}

/// Maximum-determinant positive definite completion.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralExtension {
    m: usize,
    matrix: DMatrix<f64>,
}

impl CentralExtension {
    pub(crate) fn from_parts(m: usize, matrix: DMatrix<f64>) -> Self {
        Self { m, matrix }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn log_det(&self) -> Result<f64> {
        linalg::log_det_spd(&self.matrix)
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        linalg::inverse_spd(&self.matrix)
    }

    /// Largest `|(C⁻¹)_ij|` outside the band relative to `max |C⁻¹|`.
    pub fn off_band_inverse_ratio(&self) -> Result<f64> {
        let inv = self.inverse()?;
        let mut off = 0.0_f64;
        for j in 0..self.n() {
            for i in 0..self.n() {
                if i.abs_diff(j) > self.m {
                    off = off.max(inv[(i, j)].abs());
                }
            }
        }
        Ok(off / linalg::max_abs(&inv))
    }
}

/// Fills the free entries diagonal by diagonal (`|i-j| = m+1, m+2, ...`,
/// left to right), each as the one-step extension of its own window.
pub fn central_extension(p: &PartialBandMatrix) -> Result<CentralExtension> {
    p.check_feasible()?;
    let n = p.n;
    let mut c = p.to_dense(0.0);
    for d in p.m + 1..n {
        for s in 0..n - d {
            let t = s + d;
            let x = one_step_fill(&c, s, t)?;
            c[(s, t)] = x;
            c[(t, s)] = x;
        }
    }
    Ok(CentralExtension { m: p.m, matrix: c })
}

/// `C⁻¹ = L V Lᵀ` with `L` unit lower-triangular of bandwidth `m` and `V`
/// positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BandFactorization {
    m: usize,
    l: DMatrix<f64>,
    v: Vec<f64>,
}

impl BandFactorization {
    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// `L V Lᵀ`, the (banded) inverse of the central extension.
    pub fn inverse_matrix(&self) -> DMatrix<f64> {
        let lv = DMatrix::from_fn(self.n(), self.n(), |i, j| self.l[(i, j)] * self.v[j]);
        let mut out = lv * self.l.transpose();
        out.fill_upper_triangle_with_lower_triangle();
        out
    }

    /// `C = L⁻ᵀ V⁻¹ L⁻¹` by triangular solves.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.n();
        let l_inv = self
            .l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Numerical("singular band factor".into()))?;
        let scaled = DMatrix::from_fn(n, n, |i, j| l_inv[(i, j)] / self.v[i]);
        let mut c = l_inv.transpose() * scaled;
        c.fill_upper_triangle_with_lower_triangle();
        Ok(c)
    }

    /// `log det C = -Σ log v_j`.
    pub fn log_det_covariance(&self) -> f64 {
        -self.v.iter().map(|v| v.ln()).sum::<f64>()
    }
}

/// Banded factorization of the inverse of the central extension, built
/// column by column from band blocks only.
///
/// Column `j` of `L` below the diagonal solves
/// `Σ(j+1..β) ℓ = -σ(j+1..β, j)` with `β = min(j+m, n-1)`, and
/// `v_j = (Σ(j..β)⁻¹)₁₁`. For the last index the block is the scalar
/// `σ_nn`, so `v_n = 1/σ_nn`.
pub fn factored_extension(p: &PartialBandMatrix) -> Result<BandFactorization> {
    p.check_feasible()?;
    let n = p.n;
    let mut l = DMatrix::identity(n, n);
    let mut v = Vec::with_capacity(n);
    for j in 0..n {
        let beta = (j + p.m).min(n - 1);
        let trailing = p.block(j, beta);
        let chol = linalg::cholesky(&trailing)
            .ok_or_else(|| Error::Numerical(format!("band block at {j} lost definiteness")))?;
        let mut e1 = DVector::zeros(beta - j + 1);
        e1[0] = 1.0;
        v.push(chol.solve(&e1)[0]);

        if beta > j {
            let sub = p.block(j + 1, beta);
            let rhs = p.column_segment(j + 1, beta, j);
            let coef = linalg::solve_spd(&sub, &rhs)?;
            for (k, c) in coef.iter().enumerate() {
                l[(j + 1 + k, j)] = -c;
            }
        }
    }
    Ok(BandFactorization { m: p.m, l, v })
}

/// Differential entropy of `N(0, S)`:
/// `½ log det S + ½ n (1 + log 2π)`.
pub fn gaussian_entropy(s: &DMatrix<f64>) -> Result<f64> {
    let n = s.nrows() as f64;
    Ok(0.5 * linalg::log_det_spd(s)? + 0.5 * n * (1.0 + (2.0 * PI).ln()))
}

/// `log det S + trace(S̄ S⁻¹)`.
pub fn maxlik_objective(s: &DMatrix<f64>, sbar: &DMatrix<f64>) -> Result<f64> {
    if sbar.shape() != s.shape() {
        return Err(Error::Dimension {
            expected: s.nrows(),
            got: sbar.nrows(),
        });
    }
    let chol = linalg::cholesky(s)
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    let l = chol.l_dirty();
    let log_det: f64 = (0..s.nrows()).map(|k| 2.0 * l[(k, k)].ln()).sum();
    let trace = chol.solve(sbar).trace();
    Ok(log_det + trace)
}
