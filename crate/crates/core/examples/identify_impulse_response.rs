//! Simulate a system, tune the kernel hyperparameters by marginal
//! likelihood, and estimate the impulse response.
//!
//! cargo run --release --example identify_impulse_response

use stable_spline::sysid::{
    fit_percent, noise_variance_for_snr, simulate_dataset, tune_hyperparameters, white_noise_input,
    LikelihoodEvaluator, TuneConfig,
};

fn main() -> stable_spline::Result<()> {
    let (n, n_samples) = (50, 500);
    let f_true: Vec<f64> = (1..=n).map(|k| 0.8_f64.powi(k)).collect();

    let u = white_noise_input(n_samples, 10);
    let sigma2 = noise_variance_for_snr(&f_true, &u, n_samples, 10.0)?;
    let data = simulate_dataset(&f_true, &u, n_samples, sigma2, 11)?;

    let h = tune_hyperparameters(&data, n as usize, &TuneConfig::default())?;
    println!("alpha = {:.4}, lambda = {:.4e}, sigma2 = {:.4e} (true {sigma2:.4e})", h.alpha, h.lambda, h.sigma2);

    let est = LikelihoodEvaluator::new(&data, n as usize)?.estimate(&h)?;
    println!("objective = {:.6}", est.objective);
    println!("fit = {:.1}%", fit_percent(&est.f_hat, &f_true));
    for k in 0..8 {
        println!("  f[{:>2}] = {:+.4}  (true {:+.4})", k + 1, est.f_hat[k], f_true[k]);
    }
    Ok(())
}
