//! Gaussian-process impulse-response estimation with the TC prior.
//!
//! Model: `y = G f + e` with `f ~ N(0, K(α, λ))` truncated to `n` lags and
//! `e ~ N(0, σ² I)`. Hyperparameters are chosen by minimizing
//! `J(η) = log det Σ_y + yᵀ Σ_y⁻¹ y`, `Σ_y = G K Gᵀ + σ² I`, and the
//! impulse response is the posterior mean `K Gᵀ Σ_y⁻¹ y`.
//!
//! Three evaluation routes exist for both quantities:
//! the literal `N x N` data-space form, the `n x n` weight-space form built
//! on the closed-form tridiagonal `K⁻¹` and `log det K`, and
//! [`LikelihoodEvaluator`], which uses `K = U W Uᵀ` so that `(GU)ᵀ(GU)` is
//! computed once per dataset and every evaluation costs one `n x n` Cholesky.

mod simulate;
mod tuning;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{check_alpha, check_lambda, StableSplineKernel, TriFactor};
use crate::linalg;

pub use simulate::{
    fit_percent, noise_variance_for_snr, sample_from_prior, simulate_dataset, white_noise_input,
};
pub use tuning::{tune_hyperparameters, Bounds, TuneConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SysIdDataset {
    u: Vec<f64>,
    y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl SysIdDataset {
    /// `u[s]` is the input at time `s+1`; `y[t]` the output at time `t+1`.
    /// Inputs before time 1 are zero.
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Parse("dataset has no output samples".into()));
        }
        if u.len() < y.len() {
            return Err(Error::Dimension {
                expected: y.len(),
                got: u.len(),
            });
        }
        if u.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Parse("dataset contains non-finite samples".into()));
        }
        Ok(Self { u, y, seed: None })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn convolution_operator(&self, n: usize) -> Result<DMatrix<f64>> {
        build_convolution_operator(&self.u, self.n_samples(), n)
    }

    fn y_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }
}

/// Default FIR order: `min(100, N/2)`, at least 1.
pub fn default_fir_order(n_samples: usize) -> usize {
    (n_samples / 2).clamp(1, 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub alpha: f64,
    pub lambda: f64,
    pub sigma2: f64,
}

impl Hyperparams {
    pub fn new(alpha: f64, lambda: f64, sigma2: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_lambda(lambda)?;
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain(
                "sigma2",
                format!("noise variance must be positive and finite, got {sigma2}"),
            ));
        }
        Ok(Self {
            alpha,
            lambda,
            sigma2,
        })
    }

    pub fn kernel(&self, n: usize) -> Result<StableSplineKernel> {
        StableSplineKernel::new(n, self.alpha, self.lambda)
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.alpha, self.lambda, self.sigma2).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseEstimate {
    #[serde(flatten)]
    pub hyperparams: Hyperparams,
    /// `J` at `hyperparams`.
    pub objective: f64,
    /// Estimated impulse response at lags `1..=n`.
    pub f_hat: Vec<f64>,
}

/// `G[t, k] = u_{t-k}` for `t = 1..N`, `k = 1..n`, with `u_s = 0` for
/// `s <= 0`. Inputs beyond `u.len()` are treated as zero as well.
pub fn build_convolution_operator(u: &[f64], n_samples: usize, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::domain("n", "FIR order must be at least 1"));
    }
    if n_samples == 0 {
        return Err(Error::Parse("need at least one output sample".into()));
    }
    Ok(DMatrix::from_fn(n_samples, n, |t, k| {
        // 1-based: u_{(t+1)-(k+1)} = u_{t-k}, stored at index t-k-1.
        if t > k {
            u.get(t - k - 1).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }))
}

/// `Σ_y = (G U) W (G U)ᵀ + σ² I`.
pub fn output_covariance(h: &Hyperparams, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    h.validate()?;
    let factor = h.kernel(g.ncols())?.factorize();
    let gu = TriFactor::right_mul_u(g);
    let scaled = DMatrix::from_fn(gu.nrows(), gu.ncols(), |i, j| gu[(i, j)] * factor.w()[j]);
    let mut sigma = scaled * gu.transpose();
    sigma.fill_upper_triangle_with_lower_triangle();
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += h.sigma2;
    }
    Ok(sigma)
}

/// `J = log det Σ_y + yᵀ Σ_y⁻¹ y` through a Cholesky factorization of the
/// `N x N` output covariance.
pub fn marginal_likelihood(h: &Hyperparams, data: &SysIdDataset, n: usize) -> Result<f64> {
    marginal_likelihood_operator(h, &data.convolution_operator(n)?, data.y())
}

/// [`marginal_likelihood`] for an explicit operator `G` and output `y`.
pub fn marginal_likelihood_operator(h: &Hyperparams, g: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    Ok(DataSpace::new(h, g, y)?.objective)
}

/// Cholesky of `Σ_y` together with `Σ_y⁻¹ y` and `J`.
struct DataSpace {
    weights: DVector<f64>,
    objective: f64,
}

impl DataSpace {
    fn new(h: &Hyperparams, g: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        if y.len() != g.nrows() {
            return Err(Error::Dimension {
                expected: g.nrows(),
                got: y.len(),
            });
        }
        let sigma = output_covariance(h, g)?;
        let chol = linalg::cholesky(&sigma).ok_or_else(|| {
            Error::Numerical("output covariance Cholesky failed (overflow?)".into())
        })?;
        let l = chol.l_dirty();
        let log_det: f64 = (0..sigma.nrows()).map(|k| 2.0 * l[(k, k)].ln()).sum();
        let y = DVector::from_column_slice(y);
        let weights = chol.solve(&y);
        Ok(Self {
            objective: log_det + y.dot(&weights),
            weights,
        })
    }
}

/// The same objective through `n x n` quantities only:
/// `log det Σ_y = N log σ² + log det K + log det(K⁻¹ + GᵀG/σ²)` and
/// `yᵀΣ_y⁻¹y = (yᵀy - gᵀ(σ²K⁻¹ + GᵀG)⁻¹g)/σ²` with `g = Gᵀy`, using the
/// closed-form `K⁻¹` and `log det K`.
pub fn marginal_likelihood_weight_space(
    h: &Hyperparams,
    data: &SysIdDataset,
    n: usize,
) -> Result<f64> {
    h.validate()?;
    let g = data.convolution_operator(n)?;
    let kernel = h.kernel(n)?;
    let precision = weight_space_precision(&kernel, &g, h.sigma2)?;
    let chol = linalg::cholesky(&precision)
        .ok_or_else(|| Error::Numerical("posterior precision is not positive definite".into()))?;
    let l = chol.l_dirty();
    let log_det_precision: f64 = (0..n).map(|k| 2.0 * l[(k, k)].ln()).sum();
    let y = data.y_vector();
    let gty = g.transpose() * &y;
    let n_samples = data.n_samples() as f64;
    let log_det = n_samples * h.sigma2.ln() + kernel.log_det() + log_det_precision;
    let quad = (y.dot(&y) - gty.dot(&chol.solve(&gty)) / h.sigma2) / h.sigma2;
    Ok(log_det + quad)
}

/// `K⁻¹ + GᵀG/σ²`.
fn weight_space_precision(
    kernel: &StableSplineKernel,
    g: &DMatrix<f64>,
    sigma2: f64,
) -> Result<DMatrix<f64>> {
    let inv = kernel.inverse()?;
    let mut m = g.transpose() * g / sigma2;
    for i in 0..kernel.n() {
        m[(i, i)] += inv.diag()[i];
        if i + 1 < kernel.n() {
            m[(i, i + 1)] += inv.offdiag()[i];
            m[(i + 1, i)] += inv.offdiag()[i];
        }
    }
    Ok(m)
}

/// Posterior mean `K Gᵀ (G K Gᵀ + σ² I)⁻¹ y`, solved in data space.
pub fn estimate_impulse_response(
    data: &SysIdDataset,
    n: usize,
    h: &Hyperparams,
) -> Result<ImpulseEstimate> {
    estimate_with_operator(&data.convolution_operator(n)?, data.y(), h)
}

/// [`estimate_impulse_response`] for an explicit operator `G` and output `y`.
pub fn estimate_with_operator(
    g: &DMatrix<f64>,
    y: &[f64],
    h: &Hyperparams,
) -> Result<ImpulseEstimate> {
    let solved = DataSpace::new(h, g, y)?;
    let f_hat = h
        .kernel(g.ncols())?
        .mul_vec((g.transpose() * solved.weights).as_slice())?;
    Ok(ImpulseEstimate {
        hyperparams: *h,
        objective: solved.objective,
        f_hat: f_hat.as_slice().to_vec(),
    })
}

/// Posterior mean in weight space: `(K⁻¹ + GᵀG/σ²)⁻¹ Gᵀy/σ²`, with the
/// closed-form tridiagonal `K⁻¹`.
pub fn estimate_weight_space(data: &SysIdDataset, n: usize, h: &Hyperparams) -> Result<Vec<f64>> {
    h.validate()?;
    let g = data.convolution_operator(n)?;
    let precision = weight_space_precision(&h.kernel(n)?, &g, h.sigma2)?;
    let rhs = g.transpose() * data.y_vector() / h.sigma2;
    Ok(linalg::solve_spd(&precision, &rhs)?.as_slice().to_vec())
}

/// Per-dataset precomputation for repeated evaluation of `J`.
///
/// With `B = G U W^{1/2}`, `Σ_y = B Bᵀ + σ² I`, so
/// `log det Σ_y = (N-n) log σ² + log det(σ² I + BᵀB)` and
/// `yᵀΣ_y⁻¹y = (yᵀy - bᵀ(σ² I + BᵀB)⁻¹b)/σ²` with `b = Bᵀy`. Since `U` does
/// not depend on the hyperparameters, `(GU)ᵀ(GU)` and `(GU)ᵀy` are formed
/// once.
#[derive(Debug, Clone)]
pub struct LikelihoodEvaluator {
    n: usize,
    n_samples: usize,
    gram: DMatrix<f64>,
    proj: DVector<f64>,
    yy: f64,
}

struct Solved {
    objective: f64,
    /// `(σ² I + BᵀB)⁻¹ b`
    coef: DVector<f64>,
    sqrt_w: Vec<f64>,
}

impl LikelihoodEvaluator {
    pub fn new(data: &SysIdDataset, n: usize) -> Result<Self> {
        let g = data.convolution_operator(n)?;
        let gu = TriFactor::right_mul_u(&g);
        let y = data.y_vector();
        Ok(Self {
            n,
            n_samples: data.n_samples(),
            gram: gu.transpose() * &gu,
            proj: gu.transpose() * &y,
            yy: y.dot(&y),
        })
    }

    pub fn fir_order(&self) -> usize {
        self.n
    }

    fn solve(&self, h: &Hyperparams) -> Result<Solved> {
        h.validate()?;
        let factor = h.kernel(self.n)?.factorize();
        let sqrt_w: Vec<f64> = factor.w().iter().map(|w| w.sqrt()).collect();
        let mut a = DMatrix::from_fn(self.n, self.n, |i, j| {
            sqrt_w[i] * self.gram[(i, j)] * sqrt_w[j]
        });
        for i in 0..self.n {
            a[(i, i)] += h.sigma2;
        }
        let chol = linalg::cholesky(&a)
            .ok_or_else(|| Error::Numerical("reduced covariance Cholesky failed".into()))?;
        let l = chol.l_dirty();
        let log_det_a: f64 = (0..self.n).map(|k| 2.0 * l[(k, k)].ln()).sum();
        let b = DVector::from_fn(self.n, |i, _| sqrt_w[i] * self.proj[i]);
        let coef = chol.solve(&b);
        let log_det = (self.n_samples as f64 - self.n as f64) * h.sigma2.ln() + log_det_a;
        let quad = (self.yy - b.dot(&coef)) / h.sigma2;
        Ok(Solved {
            objective: log_det + quad,
            coef,
            sqrt_w,
        })
    }

    /// `J(h)`.
    pub fn objective(&self, h: &Hyperparams) -> Result<f64> {
        Ok(self.solve(h)?.objective)
    }

    /// Posterior mean `U W^{1/2} (σ² I + BᵀB)⁻¹ Bᵀy`.
    pub fn estimate(&self, h: &Hyperparams) -> Result<ImpulseEstimate> {
        let solved = self.solve(h)?;
        let mut f_hat: Vec<f64> = solved
            .coef
            .iter()
            .zip(&solved.sqrt_w)
            .map(|(c, s)| c * s)
            .collect();
        for k in (0..self.n.saturating_sub(1)).rev() {
            f_hat[k] += f_hat[k + 1];
        }
        Ok(ImpulseEstimate {
            hyperparams: *h,
            objective: solved.objective,
            f_hat,
        })
    }
}
