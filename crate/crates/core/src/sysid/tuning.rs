//! Marginal-likelihood hyperparameter search: a coarse grid over
//! `(α, λ, σ²)` followed by a bounded Nelder–Mead refinement in
//! `(logit α, log λ, log σ²)`.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Hyperparams, LikelihoodEvaluator, SysIdDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    /// Grid sizes for `alpha`, `lambda`, `sigma2`.
    pub grid: [usize; 3],
    pub alpha: Bounds,
    /// `None`: six decades around `mean(y²)/mean(u²)`, from `1e-4` to `1e2`
    /// times that ratio.
    pub lambda: Option<Bounds>,
    /// `None`: six decades from `1e-5 mean(y²)` to `10 mean(y²)`.
    pub sigma2: Option<Bounds>,
    /// Keep `sigma2` at this value instead of tuning it.
    pub fixed_sigma2: Option<f64>,
    /// Objective evaluations allowed for the refinement stage.
    pub max_evals: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            grid: [8, 8, 8],
            alpha: Bounds::new(0.05, 0.95),
            lambda: None,
            sigma2: None,
            fixed_sigma2: None,
            max_evals: 200,
        }
    }
}

fn mean_square(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn linspace(b: Bounds, k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![0.5 * (b.lo + b.hi)];
    }
    (0..k)
        .map(|i| b.lo + (b.hi - b.lo) * i as f64 / (k - 1) as f64)
        .collect()
}

fn logspace(b: Bounds, k: usize) -> Vec<f64> {
    linspace(Bounds::new(b.lo.ln(), b.hi.ln()), k)
        .into_iter()
        .map(f64::exp)
        .collect()
}

fn check_bounds(name: &'static str, b: Bounds, unit: bool) -> Result<()> {
    let ok = b.lo > 0.0 && b.hi >= b.lo && b.hi.is_finite() && (!unit || b.hi < 1.0);
    if ok {
        Ok(())
    } else {
        Err(Error::domain(name, format!("invalid search range [{}, {}]", b.lo, b.hi)))
    }
}

/// Search box in optimizer coordinates, one entry per tuned parameter.
struct Space {
    lo: Vec<f64>,
    hi: Vec<f64>,
    fixed_sigma2: Option<f64>,
}

impl Space {
    fn to_params(&self, x: &[f64]) -> Result<Hyperparams> {
        let sigma2 = match self.fixed_sigma2 {
            Some(s) => s,
            None => x[2].exp(),
        };
        Hyperparams::new(logistic(x[0]), x[1].exp(), sigma2)
    }

    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }
}

/// Minimizes the marginal-likelihood objective over `(α, λ, σ²)`.
///
/// The grid is scanned in row-major `(α, λ, σ²)` order and the first
/// minimum wins ties. The refinement starts there and never leaves the
/// grid's box, so the result is never worse than any grid point.
pub fn tune_hyperparameters(data: &SysIdDataset, n: usize, config: &TuneConfig) -> Result<Hyperparams> {
    if data.n_samples() < 2 {
        return Err(Error::Parse("tuning needs at least two output samples".into()));
    }
    if config.grid.contains(&0) {
        return Err(Error::domain("grid", "grid sizes must be positive"));
    }
    let evaluator = LikelihoodEvaluator::new(data, n)?;
    let objective = |h: &Hyperparams| match evaluator.objective(h) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    };

    let y_scale = match mean_square(data.y()) {
        v if v > 0.0 => v,
        _ => 1.0,
    };
    let u_scale = match mean_square(&data.u()[..data.n_samples()]) {
        v if v > 0.0 => v,
        _ => 1.0,
    };
    let alpha_b = config.alpha;
    let lambda_b = config.lambda.unwrap_or_else(|| {
        let c = y_scale / u_scale;
        Bounds::new(1e-4 * c, 1e2 * c)
    });
    let sigma2_b = config
        .sigma2
        .unwrap_or_else(|| Bounds::new(1e-5 * y_scale, 10.0 * y_scale));
    check_bounds("alpha", alpha_b, true)?;
    check_bounds("lambda", lambda_b, false)?;
    if let Some(s) = config.fixed_sigma2 {
        Hyperparams::new(0.5, 1.0, s)?;
    } else {
        check_bounds("sigma2", sigma2_b, false)?;
    }

    let alphas = linspace(alpha_b, config.grid[0]);
    let lambdas = logspace(lambda_b, config.grid[1]);
    let sigmas = match config.fixed_sigma2 {
        Some(s) => vec![s],
        None => logspace(sigma2_b, config.grid[2]),
    };
    let points: Vec<Hyperparams> = alphas
        .iter()
        .flat_map(|&a| {
            lambdas.iter().flat_map({
                let sigmas = &sigmas;
                move |&l| sigmas.iter().map(move |&s| Hyperparams { alpha: a, lambda: l, sigma2: s })
            })
        })
        .collect();
    let values: Vec<f64> = points.par_iter().map(&objective).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    if !values[best].is_finite() {
        return Err(Error::Numerical(
            "objective is not finite anywhere on the grid".into(),
        ));
    }
    let start = points[best];

    let mut space = Space {
        lo: vec![logit(alpha_b.lo), lambda_b.lo.ln()],
        hi: vec![logit(alpha_b.hi), lambda_b.hi.ln()],
        fixed_sigma2: config.fixed_sigma2,
    };
    let mut x0 = vec![logit(start.alpha), start.lambda.ln()];
    if config.fixed_sigma2.is_none() {
        space.lo.push(sigma2_b.lo.ln());
        space.hi.push(sigma2_b.hi.ln());
        x0.push(start.sigma2.ln());
    }
    let steps: Vec<f64> = (0..x0.len())
        .map(|i| {
            let k = config.grid[i].max(2) as f64;
            (space.hi[i] - space.lo[i]) / (k - 1.0)
        })
        .collect();
    let f = |x: &[f64]| match space.to_params(x) {
        Ok(h) => objective(&h),
        Err(_) => f64::INFINITY,
    };
    let (x_best, f_best) = nelder_mead(&f, &space, x0, values[best], &steps, config.max_evals);
    if f_best < values[best] {
        space.to_params(&x_best)
    } else {
        Ok(start)
    }
}

/// Box-constrained Nelder–Mead (reflection 1, expansion 2, contraction ½,
/// shrink ½); trial points are clamped into the box. Returns the best point
/// evaluated.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    space: &Space,
    x0: Vec<f64>,
    f0: f64,
    steps: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let evals = Cell::new(0_usize);
    let eval = |x: &mut Vec<f64>| {
        space.clamp(x);
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), f0)];
    for i in 0..dim {
        let mut x = x0.clone();
        // Step towards the interior when sitting on the upper face.
        x[i] += if x0[i] + steps[i] <= space.hi[i] { steps[i] } else { -steps[i] };
        let v = eval(&mut x);
        simplex.push((x, v));
    }

    while evals.get() < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (f_lo, f_hi) = (simplex[0].1, simplex[dim].1);
        let spread = (f_hi - f_lo).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        if spread <= 1e-10 * (1.0 + f_lo.abs()) && size < 1e-8 {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(x, _)| x[i]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let mut xr = along(-1.0);
        let fr = eval(&mut xr);
        if fr < simplex[0].1 {
            let mut xe = along(-2.0);
            let fe = eval(&mut xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (mut xc, t) = if fr < simplex[dim].1 {
            (along(-0.5), fr)
        } else {
            (along(0.5), simplex[dim].1)
        };
        let fc = eval(&mut xc);
        if fc < t {
            simplex[dim] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for (x, v) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&best) {
                *xi = bi + 0.5 * (*xi - bi);
            }
            *v = eval(x);
        }
    }
    simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex is never empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysid::{simulate_dataset, white_noise_input};

    fn quadratic_space() -> Space {
        Space {
            lo: vec![-5.0, -5.0],
            hi: vec![5.0, 5.0],
            fixed_sigma2: Some(1.0),
        }
    }

    #[test]
    fn nelder_mead_finds_interior_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2);
        let (x, v) = nelder_mead(&f, &quadratic_space(), vec![0.0, 0.0], f(&[0.0, 0.0]), &[1.0, 1.0], 500);
        assert!(v < 1e-8, "{x:?} {v}");
    }

    #[test]
    fn nelder_mead_respects_box() {
        let f = |x: &[f64]| x[0] + x[1];
        let (x, _) = nelder_mead(&f, &quadratic_space(), vec![0.0, 0.0], 0.0, &[1.0, 1.0], 500);
        assert!(x.iter().all(|v| (*v + 5.0).abs() < 1e-6), "{x:?}");
    }

    #[test]
    fn zero_output_drives_lambda_to_lower_bound() {
        let u = white_noise_input(60, 1);
        let data = SysIdDataset::new(u, vec![0.0; 60]).unwrap();
        let config = TuneConfig {
            lambda: Some(Bounds::new(1e-3, 1e3)),
            fixed_sigma2: Some(1e-2),
            ..TuneConfig::default()
        };
        let h = tune_hyperparameters(&data, 10, &config).unwrap();
        assert!((h.lambda / 1e-3 - 1.0).abs() < 1e-6, "{h:?}");
    }

    #[test]
    fn refined_never_worse_than_grid() {
        let u = white_noise_input(120, 5);
        let f: Vec<f64> = (1..=20).map(|k| 0.7_f64.powi(k)).collect();
        let data = simulate_dataset(&f, &u, 120, 0.05, 9).unwrap();
        let config = TuneConfig {
            grid: [4, 4, 4],
            ..TuneConfig::default()
        };
        let h = tune_hyperparameters(&data, 20, &config).unwrap();
        let eval = LikelihoodEvaluator::new(&data, 20).unwrap();
        let best = eval.objective(&h).unwrap();
        // Generating values are not on the grid, but the argmin dominates
        // everything it evaluated, including every grid point.
        for a in linspace(config.alpha, 4) {
            let ys = mean_square(data.y());
            let us = mean_square(data.u());
            for l in logspace(Bounds::new(1e-4 * ys / us, 1e2 * ys / us), 4) {
                for s in logspace(Bounds::new(1e-5 * ys, 10.0 * ys), 4) {
                    let v = eval.objective(&Hyperparams { alpha: a, lambda: l, sigma2: s }).unwrap();
                    assert!(best <= v + 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_short_data() {
        let data = SysIdDataset::new(vec![1.0], vec![0.5]).unwrap();
        assert!(tune_hyperparameters(&data, 1, &TuneConfig::default()).is_err());
    }
}
