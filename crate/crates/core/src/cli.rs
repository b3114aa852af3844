//! Command-line front end: argument definitions and the subcommand bodies.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, format_f64, matrix_rows};
use crate::kernel::StableSplineKernel;
use crate::maxent::{central_extension, factored_extension};
use crate::sysid::{
    default_fir_order, fit_percent, noise_variance_for_snr, simulate_dataset, tune_hyperparameters,
    white_noise_input, Bounds, ImpulseEstimate, LikelihoodEvaluator, TuneConfig,
};
use crate::verify::{self, Suite, VerifyConfig};

#[derive(Debug, Parser)]
#[command(name = "stable-spline", version, about = "Stable spline kernel toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel matrix, tridiagonal inverse, factor W and log-determinant.
    Kernel(KernelArgs),
    /// Maximum-entropy completion of a band matrix read from JSON.
    Complete(CompleteArgs),
    /// Simulate a `t,u,y` dataset from f_k = decay^k.
    Simulate(SimulateArgs),
    /// Tune hyperparameters by marginal likelihood and estimate f.
    Identify(IdentifyArgs),
    /// Run the property suites and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Band JSON `{"n", "m", "diagonals"}`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Length of the true impulse response.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 0.8)]
    pub decay: f64,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    /// Signal-to-noise ratio var(G f)/σ². Ignored when --sigma2 is given.
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the true impulse response as a JSON array.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    /// Dataset CSV with header `t,u,y`.
    #[arg(long)]
    pub data: PathBuf,
    /// FIR order (default: min(100, N/2)).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 0.95)]
    pub alpha_max: f64,
    #[arg(long, requires = "lambda_max")]
    pub lambda_min: Option<f64>,
    #[arg(long, requires = "lambda_min")]
    pub lambda_max: Option<f64>,
    #[arg(long, requires = "sigma2_max")]
    pub sigma2_min: Option<f64>,
    #[arg(long, requires = "sigma2_min")]
    pub sigma2_max: Option<f64>,
    /// Fix the noise variance instead of tuning it.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Grid points per hyperparameter.
    #[arg(long, default_value_t = 8)]
    pub grid: usize,
    #[arg(long, default_value_t = 200)]
    pub max_evals: usize,
    /// JSON array with the true impulse response; adds a "fit" field.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 30)]
    pub n_max: usize,
    /// Comma-separated suite names, `all` or `none`.
    #[arg(long, default_value = "all")]
    pub suites: String,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TridiagonalJson {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KernelReport {
    pub n: usize,
    pub alpha: f64,
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    pub inverse: TridiagonalJson,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
    pub logdet: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompletionReport {
    pub n: usize,
    pub m: usize,
    pub matrix: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    pub logdet: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IdentifyReport {
    #[serde(flatten)]
    pub estimate: ImpulseEstimate,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit: Option<f64>,
}

pub fn kernel_report(n: usize, alpha: f64, lambda: f64) -> Result<KernelReport> {
    let k = StableSplineKernel::new(n, alpha, lambda)?;
    let inv = k.inverse()?;
    Ok(KernelReport {
        n,
        alpha,
        lambda,
        k: matrix_rows(&k.dense()),
        inverse: TridiagonalJson {
            diag: inv.diag().to_vec(),
            offdiag: inv.offdiag().to_vec(),
        },
        w: k.factorize().w().to_vec(),
        logdet: k.log_det(),
    })
}

/// Long-format CSV `quantity,i,j,value` (1-based indices).
fn kernel_csv(r: &KernelReport) -> String {
    let mut out = String::from("quantity,i,j,value\n");
    let mut row = |q: &str, i: usize, j: usize, v: f64| {
        out.push_str(&format!("{q},{i},{j},{}\n", format_f64(v)));
    };
    for (i, line) in r.k.iter().enumerate() {
        for (j, v) in line.iter().enumerate() {
            row("K", i + 1, j + 1, *v);
        }
    }
    for (i, v) in r.inverse.diag.iter().enumerate() {
        row("Kinv", i + 1, i + 1, *v);
    }
    for (i, v) in r.inverse.offdiag.iter().enumerate() {
        row("Kinv", i + 1, i + 2, *v);
        row("Kinv", i + 2, i + 1, *v);
    }
    for (i, v) in r.w.iter().enumerate() {
        row("W", i + 1, i + 1, *v);
    }
    row("logdet", 0, 0, r.logdet);
    out
}

pub fn cmd_kernel(args: &KernelArgs) -> Result<()> {
    let report = kernel_report(args.n, args.alpha, args.lambda)?;
    let text = match args.format {
        Format::Json => io::to_json(&report)?,
        Format::Csv => kernel_csv(&report),
    };
    io::emit(args.out.as_deref(), &text)
}

pub fn cmd_complete(args: &CompleteArgs) -> Result<()> {
    let p = io::read_band(&args.input)?;
    let ext = central_extension(&p)?;
    let fac = factored_extension(&p)?;
    let report = CompletionReport {
        n: p.n(),
        m: p.m(),
        matrix: matrix_rows(ext.matrix()),
        l: matrix_rows(fac.l()),
        v: fac.v().to_vec(),
        logdet: ext.log_det()?,
    };
    io::emit(args.out.as_deref(), &io::to_json(&report)?)
}

pub fn impulse_truth(n: usize, decay: f64) -> Result<Vec<f64>> {
    if !(decay.is_finite() && decay.abs() < 1.0) {
        return Err(Error::domain("decay", format!("must satisfy |decay| < 1, got {decay}")));
    }
    Ok((1..=n).map(|k| decay.powi(k as i32)).collect())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    if args.samples == 0 {
        return Err(Error::domain("samples", "must be positive"));
    }
    let f_true = impulse_truth(args.n, args.decay)?;
    let u = white_noise_input(args.samples, args.seed);
    let sigma2 = match args.sigma2 {
        Some(s) => s,
        None => noise_variance_for_snr(&f_true, &u, args.samples, args.snr)?,
    };
    // Noise draws use a stream distinct from the input's; the file records
    // the user seed, from which both are derived.
    let data = simulate_dataset(&f_true, &u, args.samples, sigma2, noise_seed(args.seed))?
        .with_seed(args.seed);
    io::write_dataset(args.out.as_deref(), &data)?;
    if let Some(path) = &args.truth {
        io::emit(Some(path), &io::to_json(&f_true)?)?;
    }
    Ok(())
}

fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

pub fn tune_config(args: &IdentifyArgs) -> TuneConfig {
    let pair = |lo: Option<f64>, hi: Option<f64>| lo.zip(hi).map(|(lo, hi)| Bounds::new(lo, hi));
    TuneConfig {
        grid: [args.grid; 3],
        alpha: Bounds::new(args.alpha_min, args.alpha_max),
        lambda: pair(args.lambda_min, args.lambda_max),
        sigma2: pair(args.sigma2_min, args.sigma2_max),
        fixed_sigma2: args.sigma2,
        max_evals: args.max_evals,
    }
}

pub fn cmd_identify(args: &IdentifyArgs) -> Result<()> {
    let data = io::read_dataset(&args.data)?;
    let n = match args.n {
        Some(0) => return Err(Error::domain("n", "FIR order must be positive")),
        Some(n) => n,
        None => default_fir_order(data.n_samples()),
    };
    let h = tune_hyperparameters(&data, n, &tune_config(args))?;
    let estimate = LikelihoodEvaluator::new(&data, n)?.estimate(&h)?;
    let fit = match &args.truth {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
            let f_true: Vec<f64> = serde_json::from_str(&text)?;
            Some(fit_percent(&estimate.f_hat, &f_true))
        }
        None => None,
    };
    io::emit(args.out.as_deref(), &io::to_json(&IdentifyReport { estimate, fit })?)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<verify::Report> {
    let config = VerifyConfig {
        n_max: args.n_max,
        seed: args.seed,
        suites: Suite::parse_list(&args.suites)?,
    };
    verify::run(&config)
}

/// Runs one subcommand. `Ok(false)` means `verify` ran but a suite failed.
pub fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Kernel(a) => cmd_kernel(a)?,
        Command::Complete(a) => cmd_complete(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Identify(a) => cmd_identify(a)?,
        Command::Verify(a) => {
            let report = cmd_verify(a)?;
            println!("{report}");
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}
