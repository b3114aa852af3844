//! Property suites behind the `verify` subcommand.
//!
//! Each suite reports its worst observed discrepancy against a fixed
//! tolerance. Random instances are drawn from a seeded ChaCha8 stream, so a
//! report is reproducible given the configuration.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::{build_kernel, StableSplineKernel};
use crate::linalg;
use crate::maxent::{
    central_extension, factored_extension, maxlik_objective, oracle_max_entropy, PartialBandMatrix,
};
use crate::sysid::{
    estimate_impulse_response, estimate_weight_space, fit_percent, noise_variance_for_snr,
    simulate_dataset, tune_hyperparameters, white_noise_input, Hyperparams, LikelihoodEvaluator,
    SysIdDataset, TuneConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Prop1,
    InverseIdentity,
    Factorization,
    Determinant,
    ColumnSums,
    BandedInverse,
    Oracle,
    EntropyDominance,
    Recursion,
    Factored,
    MaxLik,
    DualForms,
    Identification,
}

impl Suite {
    pub const ALL: [Suite; 13] = [
        Suite::Prop1,
        Suite::InverseIdentity,
        Suite::Factorization,
        Suite::Determinant,
        Suite::ColumnSums,
        Suite::BandedInverse,
        Suite::Oracle,
        Suite::EntropyDominance,
        Suite::Recursion,
        Suite::Factored,
        Suite::MaxLik,
        Suite::DualForms,
        Suite::Identification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Prop1 => "tc-completion",
            Suite::InverseIdentity => "inverse-identity",
            Suite::Factorization => "factorization",
            Suite::Determinant => "determinant",
            Suite::ColumnSums => "column-sums",
            Suite::BandedInverse => "banded-inverse",
            Suite::Oracle => "oracle",
            Suite::EntropyDominance => "entropy-dominance",
            Suite::Recursion => "recursion",
            Suite::Factored => "factored",
            Suite::MaxLik => "maxlik",
            Suite::DualForms => "dual-forms",
            Suite::Identification => "identification",
        }
    }

    /// Parses a comma-separated list; `all` selects every suite and `none`
    /// selects nothing.
    pub fn parse_list(s: &str) -> Result<Vec<Suite>> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match item {
                "all" => out.extend(Suite::ALL),
                "none" => {}
                other => out.push(other.parse()?),
            }
        }
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                Error::domain("suites", format!("unknown suite `{s}` (known: {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    /// Largest kernel order in the closed-form suites.
    pub n_max: usize,
    pub seed: u64,
    pub suites: Vec<Suite>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n_max: 30,
            seed: 2024,
            suites: Suite::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub suite: Suite,
    pub pass: bool,
    /// Worst value of the suite's statistic.
    pub value: f64,
    pub detail: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub results: Vec<SuiteResult>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<18} {:<6} {:>10}  detail", "suite", "status", "time")?;
        for r in &self.results {
            writeln!(
                f,
                "{:<18} {:<6} {:>10}  {}",
                r.suite.name(),
                if r.pass { "PASS" } else { "FAIL" },
                format!("{:.2?}", r.elapsed),
                r.detail
            )?;
        }
        let passed = self.results.iter().filter(|r| r.pass).count();
        write!(f, "{passed}/{} suites passed", self.results.len())
    }
}

pub fn run(config: &VerifyConfig) -> Result<Report> {
    if config.n_max < 1 {
        return Err(Error::domain("n-max", "must be at least 1"));
    }
    let mut results = Vec::with_capacity(config.suites.len());
    for &suite in &config.suites {
        let start = Instant::now();
        let (pass, value, detail) = run_suite(suite, config)?;
        results.push(SuiteResult {
            suite,
            pass,
            value,
            detail,
            elapsed: start.elapsed(),
        });
    }
    Ok(Report { results })
}

type Outcome = (bool, f64, String);

fn check(value: f64, tol: f64, what: &str) -> Outcome {
    (value <= tol, value, format!("{what} {value:.2e} (tol {tol:.0e})"))
}

fn run_suite(suite: Suite, c: &VerifyConfig) -> Result<Outcome> {
    match suite {
        Suite::Prop1 => prop1(c),
        Suite::InverseIdentity => inverse_identity(c),
        Suite::Factorization => factorization(c),
        Suite::Determinant => determinant(c),
        Suite::ColumnSums => column_sums(c),
        Suite::BandedInverse => banded_inverse(c),
        Suite::Oracle => oracle(c),
        Suite::EntropyDominance => entropy_dominance(c),
        Suite::Recursion => recursion(c),
        Suite::Factored => factored(c),
        Suite::MaxLik => maxlik(c),
        Suite::DualForms => dual_forms(c),
        Suite::Identification => identification(c),
    }
}

const ALPHAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const GRID_ALPHAS: [f64; 3] = [0.2, 0.5, 0.8];
const GRID_LAMBDAS: [f64; 3] = [0.5, 1.0, 10.0];

fn kernel_grid(n_max: usize) -> Result<Vec<StableSplineKernel>> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        for &a in &GRID_ALPHAS {
            for &l in &GRID_LAMBDAS {
                out.push(StableSplineKernel::new(n, a, l)?);
            }
        }
    }
    Ok(out)
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
    let scale = a.trace() / n as f64;
    a / scale
}

/// Feasible 1- and 2-band instances with `3 <= n <= n_hi`.
fn random_bands(count: usize, n_hi: usize, rng: &mut ChaCha8Rng) -> Result<Vec<PartialBandMatrix>> {
    (0..count)
        .map(|i| {
            let n = rng.random_range(3..=n_hi.max(3));
            PartialBandMatrix::from_dense(&random_spd(n, rng), 1 + i % 2)
        })
        .collect()
}

fn prop1(c: &VerifyConfig) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for n in 3..=c.n_max.clamp(3, 20) {
        for &a in &ALPHAS {
            let ext = central_extension(&PartialBandMatrix::tc_moments(n, a)?)?;
            worst = worst.max((ext.matrix() - build_kernel(n, a, 1.0)?).amax());
        }
    }
    Ok(check(worst, 1e-9, "max abs err"))
}

fn inverse_identity(c: &VerifyConfig) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for k in kernel_grid(c.n_max)? {
        let prod = k.inverse()?.dense() * k.dense();
        worst = worst.max((prod - DMatrix::identity(k.n(), k.n())).amax());
    }
    Ok(check(worst, 1e-8, "max residual"))
}

fn factorization(c: &VerifyConfig) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for k in kernel_grid(c.n_max)? {
        let rec = k.factorize().reconstruct();
        let dense = k.dense();
        for (r, d) in rec.iter().zip(dense.iter()) {
            worst = worst.max((r - d).abs() / d.abs());
        }
    }
    Ok(check(worst, 1e-12, "max rel err"))
}

fn determinant(c: &VerifyConfig) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for n in 1..=c.n_max.min(12) {
        for &a in &ALPHAS {
            for &l in &GRID_LAMBDAS {
                let k = StableSplineKernel::new(n, a, l)?;
                let det = k.dense().lu().determinant();
                if !(det > 0.0) {
                    return Ok((false, f64::NAN, format!("LU determinant {det:e} at n={n}")));
                }
                worst = worst.max((k.log_det() - det.ln()).abs());
            }
        }
    }
    Ok(check(worst, 1e-8, "max abs err vs LU"))
}

fn column_sums(c: &VerifyConfig) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for k in kernel_grid(c.n_max)? {
        let inv = k.inverse()?;
        for j in 0..k.n().saturating_sub(1) {
            let col = inv.column(j);
            let norm = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            worst = worst.max(col.iter().sum::<f64>().abs() / norm);
        }
    }
    Ok(check(worst, 1e-9, "max |sum|/norm"))
}

fn banded_inverse(c: &VerifyConfig) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for n in 3..=c.n_max.clamp(3, 20) {
        for &a in &ALPHAS {
            let ext = central_extension(&PartialBandMatrix::tc_moments(n, a)?)?;
            worst = worst.max(ext.off_band_inverse_ratio()?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    for p in random_bands(50, c.n_max.min(10), &mut rng)? {
        worst = worst.max(central_extension(&p)?.off_band_inverse_ratio()?);
    }
    Ok(check(worst, 1e-9, "max off-band ratio"))
}

fn oracle(c: &VerifyConfig) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut worst = 0.0_f64;
    for p in random_bands(50, c.n_max.min(10), &mut rng)? {
        let ext = central_extension(&p)?;
        worst = worst.max((ext.matrix() - oracle_max_entropy(&p)?.matrix()).amax());
    }
    Ok(check(worst, 1e-6, "max abs diff"))
}

/// Random PD completion: the central extension with free entries moved by
/// a random symmetric perturbation, halved until positive definite.
fn perturbed_completion(
    ext: &DMatrix<f64>,
    p: &PartialBandMatrix,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let n = ext.nrows();
    let mut delta = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if !p.is_specified(i, j) {
                let v: f64 = rng.sample(StandardNormal);
                delta[(i, j)] = 0.1 * v;
                delta[(j, i)] = 0.1 * v;
            }
        }
    }
    let mut step = 1.0;
    loop {
        let cand = ext + &delta * step;
        if linalg::is_positive_definite(&cand) {
            return cand;
        }
        step *= 0.5;
    }
}

fn entropy_dominance(c: &VerifyConfig) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0x5eed);
    let mut worst = f64::NEG_INFINITY;
    for p in random_bands(30, c.n_max.min(10), &mut rng)? {
        let ext = central_extension(&p)?;
        let best = ext.log_det()?;
        for _ in 0..5 {
            let other = perturbed_completion(ext.matrix(), &p, &mut rng);
            worst = worst.max(linalg::log_det_spd(&other)? - best);
        }
    }
    Ok(check(worst, 1e-12, "max log det excess"))
}

fn recursion(c: &VerifyConfig) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0xc0de);
    let mut worst = 0.0_f64;
    for p in random_bands(30, c.n_max.min(12), &mut rng)? {
        let ext = central_extension(&p)?;
        let n = p.n();
        for _ in 0..5 {
            let s = rng.random_range(0..n);
            let t = rng.random_range(s..n);
            let sub = ext.matrix().view((s, s), (t - s + 1, t - s + 1)).clone_owned();
            let win = central_extension(&p.window(s, t))?;
            worst = worst.max((sub - win.matrix()).amax());
        }
    }
    Ok(check(worst, 1e-9, "max abs diff"))
}

fn factored(c: &VerifyConfig) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0xfac7);
    let mut worst = 0.0_f64;
    for p in random_bands(30, c.n_max.min(20), &mut rng)? {
        let ext = central_extension(&p)?;
        let inv = linalg::inverse_spd(&factored_extension(&p)?.inverse_matrix())?;
        worst = worst.max((inv - ext.matrix()).amax() / linalg::max_abs(ext.matrix()));
    }
    Ok(check(worst, 1e-8, "max rel diff"))
}

/// Random PD perturbation of the band of `C⁻¹`, mapped back to a covariance.
fn banded_precision_neighbour(ext: &DMatrix<f64>, m: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let prec = linalg::inverse_spd(ext)?;
    let n = prec.nrows();
    let scale = 1e-2 * linalg::max_abs(&prec);
    let mut delta = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n.min(i + m + 1) {
            let v: f64 = rng.sample(StandardNormal);
            delta[(i, j)] = v * scale;
            delta[(j, i)] = v * scale;
        }
    }
    let mut step = 1.0;
    loop {
        let cand = &prec + &delta * step;
        if linalg::is_positive_definite(&cand) {
            return linalg::inverse_spd(&cand);
        }
        step *= 0.5;
    }
}

fn maxlik(c: &VerifyConfig) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0x1111);
    let mut problems = random_bands(4, c.n_max.min(8), &mut rng)?;
    problems.push(PartialBandMatrix::tc_moments(c.n_max.clamp(3, 8), 0.6)?);
    let mut worst = f64::INFINITY;
    for p in problems {
        let ext = central_extension(&p)?;
        let sbar = p.to_dense(0.0);
        let base = maxlik_objective(ext.matrix(), &sbar)?;
        for _ in 0..20 {
            let other = banded_precision_neighbour(ext.matrix(), p.m(), &mut rng)?;
            worst = worst.min(maxlik_objective(&other, &sbar)? - base);
        }
    }
    Ok((
        worst >= -1e-10,
        worst,
        format!("min objective increase {worst:.2e} (>= -1e-10)"),
    ))
}

fn random_problem(rng: &mut ChaCha8Rng) -> Result<(SysIdDataset, usize, Hyperparams)> {
    let n = rng.random_range(2..=50);
    let n_samples = rng.random_range(n..=200);
    let u: Vec<f64> = (0..n_samples).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = (0..n_samples).map(|_| rng.sample(StandardNormal)).collect();
    let h = Hyperparams::new(
        rng.random_range(0.1..0.95),
        rng.random_range(0.1..10.0),
        rng.random_range(0.01..1.0),
    )?;
    Ok((SysIdDataset::new(u, y)?, n, h))
}

fn dual_forms(c: &VerifyConfig) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0xd0a1);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let (data, n, h) = random_problem(&mut rng)?;
        let a = estimate_impulse_response(&data, n, &h)?.f_hat;
        let b = estimate_weight_space(&data, n, &h)?;
        let b_fast = LikelihoodEvaluator::new(&data, n)?.estimate(&h)?.f_hat;
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for other in [&b, &b_fast] {
            let diff = a.iter().zip(other).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(diff / norm);
        }
    }
    Ok(check(worst, 1e-6, "max rel diff"))
}

fn identification(c: &VerifyConfig) -> Result<Outcome> {
    let (n, n_samples) = (50, 500);
    let f_true: Vec<f64> = (1..=n).map(|k| 0.8_f64.powi(k as i32)).collect();
    let mut fits = Vec::with_capacity(20);
    for s in 0..20 {
        let seed = c.seed.wrapping_add(s);
        let u = white_noise_input(n_samples, seed);
        let sigma2 = noise_variance_for_snr(&f_true, &u, n_samples, 10.0)?;
        let data = simulate_dataset(&f_true, &u, n_samples, sigma2, seed.wrapping_add(1 << 32))?;
        let h = tune_hyperparameters(&data, n, &TuneConfig::default())?;
        let est = LikelihoodEvaluator::new(&data, n)?.estimate(&h)?;
        fits.push(fit_percent(&est.f_hat, &f_true));
    }
    fits.sort_by(f64::total_cmp);
    let median = 0.5 * (fits[9] + fits[10]);
    Ok((
        median >= 80.0,
        median,
        format!("median fit {median:.1} over 20 seeds (>= 80)"),
    ))
}
