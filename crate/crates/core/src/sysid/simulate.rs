use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SysIdDataset;
use crate::error::{Error, Result};
use crate::kernel::StableSplineKernel;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn noiseless_output(f_true: &[f64], u: &[f64], n_samples: usize) -> Vec<f64> {
    (1..=n_samples)
        .map(|t| {
            f_true
                .iter()
                .enumerate()
                .filter_map(|(k, f)| {
                    // lag k+1 reads u_{t-k-1}, stored at index t-k-2
                    let s = t.checked_sub(k + 2)?;
                    u.get(s).map(|u| f * u)
                })
                .sum()
        })
        .collect()
}

/// `y_t = Σ_k f_k u_{t-k} + e_t`, `e_t ~ N(0, σ²)` i.i.d., reproducible
/// from `seed`. Inputs before time 1 are zero.
pub fn simulate_dataset(
    f_true: &[f64],
    u: &[f64],
    n_samples: usize,
    sigma2: f64,
    seed: u64,
) -> Result<SysIdDataset> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(
            "sigma2",
            format!("noise variance must be non-negative, got {sigma2}"),
        ));
    }
    let mut y = noiseless_output(f_true, u, n_samples);
    let mut rng = rng(seed);
    let sd = sigma2.sqrt();
    for v in &mut y {
        let e: f64 = StandardNormal.sample(&mut rng);
        *v += sd * e;
    }
    let mut u = u.to_vec();
    if u.len() < n_samples {
        u.resize(n_samples, 0.0);
    }
    Ok(SysIdDataset::new(u, y)?.with_seed(seed))
}

/// i.i.d. standard normal input sequence.
pub fn white_noise_input(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Noise variance giving `var(G f) / σ² = snr` on this input.
pub fn noise_variance_for_snr(f_true: &[f64], u: &[f64], n_samples: usize, snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::domain("snr", format!("must be positive, got {snr}")));
    }
    let y = noiseless_output(f_true, u, n_samples);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
    Ok(var / snr)
}

/// A draw `f = U W^{1/2} z`, `z ~ N(0, I)`, from the kernel prior.
pub fn sample_from_prior(kernel: &StableSplineKernel, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let factor = kernel.factorize();
    let mut f: Vec<f64> = factor
        .w()
        .iter()
        .map(|w| {
            let z: f64 = StandardNormal.sample(&mut rng);
            w.sqrt() * z
        })
        .collect();
    for k in (0..f.len().saturating_sub(1)).rev() {
        f[k] += f[k + 1];
    }
    f
}

/// `100 (1 - ‖f̂ - f‖ / ‖f‖)`.
pub fn fit_percent(f_hat: &[f64], f_true: &[f64]) -> f64 {
    let len = f_hat.len().max(f_true.len());
    let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    let err: f64 = (0..len)
        .map(|k| (at(f_hat, k) - at(f_true, k)).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = f_true.iter().map(|v| v * v).sum::<f64>().sqrt();
    100.0 * (1.0 - err / norm)
}
