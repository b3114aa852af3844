//! The marginal likelihood and posterior mean by three routes: the N x N
//! output covariance, the n x n weight-space form built on K⁻¹, and the
//! reduced evaluator used by the tuner.
//!
//! cargo run --example likelihood_routes

use stable_spline::sysid::{
    estimate_impulse_response, estimate_weight_space, marginal_likelihood,
    marginal_likelihood_weight_space, simulate_dataset, white_noise_input, Hyperparams,
    LikelihoodEvaluator,
};

fn main() -> stable_spline::Result<()> {
    let n = 20;
    let f_true: Vec<f64> = (1..=n).map(|k| 0.7_f64.powi(k as i32)).collect();
    let u = white_noise_input(120, 3);
    let data = simulate_dataset(&f_true, &u, 120, 0.05, 4)?;
    let h = Hyperparams::new(0.7, 1.0, 0.05)?;

    let fast = LikelihoodEvaluator::new(&data, n)?;
    println!("J data space   {:.12}", marginal_likelihood(&h, &data, n)?);
    println!("J weight space {:.12}", marginal_likelihood_weight_space(&h, &data, n)?);
    println!("J reduced      {:.12}", fast.objective(&h)?);

    let a = estimate_impulse_response(&data, n, &h)?.f_hat;
    let b = estimate_weight_space(&data, n, &h)?;
    let c = fast.estimate(&h)?.f_hat;
    let gap = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    println!("max |f̂ data - f̂ weight|  = {:.2e}", gap(&a, &b));
    println!("max |f̂ data - f̂ reduced| = {:.2e}", gap(&a, &c));
    Ok(())
}
