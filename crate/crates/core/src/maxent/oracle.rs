//! Brute-force maximum-entropy completion by coordinate ascent on `log det`.
//!
//! Each free symmetric pair `(i, j)` is updated in turn: the set of values
//! keeping the matrix positive definite is an open interval, found by
//! bisection on definiteness; `log det` is concave on it, so a golden-section
//! search brackets the maximizer, and a final bisection on the sign of
//! `∂ log det / ∂x = 2 (C⁻¹)_ij` pins it to working precision. Sweeps stop
//! once every free entry of `C⁻¹` is below the gradient tolerance.
//!
//! Nothing here uses the one-step formula or the band factorization, so it
//! serves as an independent check on both. Intended for small `n` only.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{CentralExtension, PartialBandMatrix};
use crate::error::{Error, Result};

/// Largest order accepted by the oracle.
pub const ORACLE_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy)]
pub struct OracleSettings {
    /// Stop when `max |∂ log det / ∂x_ij| < grad_tol · max(1, max |C⁻¹|)`.
    pub grad_tol: f64,
    pub max_sweeps: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-9,
            max_sweeps: 20_000,
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn chol(c: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(c.clone())
}

fn log_det(c: &DMatrix<f64>) -> f64 {
    match chol(c) {
        Some(ch) => {
            let l = ch.l_dirty();
            (0..c.nrows()).map(|k| 2.0 * l[(k, k)].ln()).sum()
        }
        None => f64::NEG_INFINITY,
    }
}

fn set_pair(c: &mut DMatrix<f64>, i: usize, j: usize, x: f64) {
    c[(i, j)] = x;
    c[(j, i)] = x;
}

/// `(C⁻¹)_ij`, or `None` if `C` is not positive definite.
fn inverse_entry(c: &DMatrix<f64>, i: usize, j: usize) -> Option<f64> {
    let ch = chol(c)?;
    let mut e = DVector::zeros(c.nrows());
    e[j] = 1.0;
    Some(ch.solve(&e)[i])
}

/// Open interval of `x` keeping `c` (with pair `(i,j)` set to `x`)
/// positive definite; `c` must be positive definite on entry.
fn feasible_interval(c: &mut DMatrix<f64>, i: usize, j: usize) -> (f64, f64) {
    let x0 = c[(i, j)];
    // The 2x2 minor bounds |x| < sqrt(c_ii c_jj).
    let bound = (c[(i, i)] * c[(j, j)]).sqrt();
    let mut edge = |outer: f64| {
        let (mut inside, mut outside) = (x0, outer);
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            set_pair(c, i, j, mid);
            if chol(c).is_some() {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let lo = edge(-bound);
    let hi = edge(bound);
    set_pair(c, i, j, x0);
    (lo, hi)
}

/// Maximizes `log det` over the pair `(i, j)` and stores the maximizer.
fn coordinate_update(c: &mut DMatrix<f64>, i: usize, j: usize) {
    let (lo, hi) = feasible_interval(c, i, j);
    let f = |x: f64, c: &mut DMatrix<f64>| {
        set_pair(c, i, j, x);
        log_det(c)
    };

    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1, c);
    let mut f2 = f(x2, c);
    let width = hi - lo;
    while b - a > 1e-6 * width {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2, c);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1, c);
        }
    }

    // d/dx log det = 2 (C⁻¹)_ij is decreasing in x; widen the bracket to the
    // feasible edges if the golden-section bracket does not straddle a root.
    let slope = |x: f64, c: &mut DMatrix<f64>| {
        set_pair(c, i, j, x);
        inverse_entry(c, i, j)
    };
    if slope(a, c).is_some_and(|s| s < 0.0) {
        a = lo;
    }
    if slope(b, c).is_some_and(|s| s > 0.0) {
        b = hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        match slope(mid, c) {
            Some(s) if s > 0.0 => a = mid,
            Some(s) if s < 0.0 => b = mid,
            Some(_) => {
                a = mid;
                b = mid;
                break;
            }
            None => break,
        }
    }
    set_pair(c, i, j, 0.5 * (a + b));
}

fn free_pairs(p: &PartialBandMatrix) -> Vec<(usize, usize)> {
    let n = p.n();
    (p.m() + 1..n)
        .flat_map(|d| (0..n - d).map(move |s| (s, s + d)))
        .collect()
}

/// Positive definite starting point: each free pair, taken diagonal by
/// diagonal, maximizes `log det` of the smallest window containing it.
fn windowed_start(p: &PartialBandMatrix) -> Result<DMatrix<f64>> {
    let mut c = p.to_dense(0.0);
    for (s, t) in free_pairs(p) {
        let mut window = c.view((s, s), (t - s + 1, t - s + 1)).clone_owned();
        let x = window_seed(&mut window, t - s)?;
        set_pair(&mut window, 0, t - s, x);
        coordinate_update(&mut window, 0, t - s);
        set_pair(&mut c, s, t, window[(0, t - s)]);
    }
    Ok(c)
}

/// Some corner value making `window` positive definite. The window minus
/// its corner is assumed to have PD leading and trailing blocks.
fn window_seed(window: &mut DMatrix<f64>, k: usize) -> Result<f64> {
    let bound = (window[(0, 0)] * window[(k, k)]).sqrt();
    let mut best: Option<(f64, f64)> = None;
    for steps in [400_usize, 100_000] {
        for step in 0..=steps {
            let x = -bound + 2.0 * bound * step as f64 / steps as f64;
            set_pair(window, 0, k, x);
            let v = log_det(window);
            if v.is_finite() && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((x, v));
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.map(|(x, _)| x).ok_or_else(|| {
        Error::Numerical("oracle could not locate a positive definite starting point".into())
    })
}

/// Maximum of `|(C⁻¹)_ij|` over free pairs, relative to `max(1, max|C⁻¹|)`.
fn free_gradient(p: &PartialBandMatrix, c: &DMatrix<f64>) -> Result<f64> {
    let inv = chol(c)
        .ok_or_else(|| Error::Numerical("oracle iterate left the PD cone".into()))?
        .inverse();
    let scale = inv.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let grad = free_pairs(p)
        .into_iter()
        .fold(0.0_f64, |m, (i, j)| m.max(2.0 * inv[(i, j)].abs()));
    Ok(grad / scale)
}

/// Numerical maximum-entropy completion of `p` (`n <= 12`).
pub fn oracle_max_entropy(p: &PartialBandMatrix) -> Result<CentralExtension> {
    oracle_check(p)?;
    let start = windowed_start(p)?;
    oracle_max_entropy_from(p, &start, OracleSettings::default())
}

fn oracle_check(p: &PartialBandMatrix) -> Result<()> {
    if p.n() > ORACLE_MAX_N {
        return Err(Error::domain(
            "n",
            format!("the oracle is limited to n <= {ORACLE_MAX_N}, got {}", p.n()),
        ));
    }
    p.check_feasible()
}

/// Coordinate ascent from an arbitrary positive definite completion `start`
/// of `p`. Band entries of `start` are overwritten with those of `p`.
pub fn oracle_max_entropy_from(
    p: &PartialBandMatrix,
    start: &DMatrix<f64>,
    settings: OracleSettings,
) -> Result<CentralExtension> {
    oracle_check(p)?;
    let n = p.n();
    if start.shape() != (n, n) {
        return Err(Error::Dimension {
            expected: n,
            got: start.nrows(),
        });
    }
    let mut c = DMatrix::from_fn(n, n, |i, j| {
        p.get(i, j)
            .unwrap_or_else(|| 0.5 * (start[(i, j)] + start[(j, i)]))
    });
    if chol(&c).is_none() {
        return Err(Error::Numerical("oracle start is not positive definite".into()));
    }
    let pairs = free_pairs(p);
    let mut residual = free_gradient(p, &c)?;
    for _ in 0..settings.max_sweeps {
        if residual < settings.grad_tol {
            return Ok(CentralExtension::from_parts(p.m(), c));
        }
        for &(i, j) in &pairs {
            coordinate_update(&mut c, i, j);
        }
        residual = free_gradient(p, &c)?;
    }
    if residual < settings.grad_tol {
        return Ok(CentralExtension::from_parts(p.m(), c));
    }
    Err(Error::NonConvergence {
        iterations: settings.max_sweeps,
        residual,
    })
}
