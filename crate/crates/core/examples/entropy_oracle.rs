//! The closed-form completion against brute-force log det maximization.
//!
//! cargo run --release --example entropy_oracle

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stable_spline::maxent::{
    central_extension, gaussian_entropy, oracle_max_entropy_from, OracleSettings, PartialBandMatrix,
};

fn main() -> stable_spline::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 7;
    let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = &b * b.transpose() + DMatrix::identity(n, n);

    let p = PartialBandMatrix::from_dense(&a, 2)?;
    let closed = central_extension(&p)?;

    // Start coordinate ascent from `a`, a valid but non-central completion.
    let brute = oracle_max_entropy_from(&p, &a, OracleSettings::default())?;

    println!("entropy of the source matrix  {:.10}", gaussian_entropy(&a)?);
    println!("entropy of the central one    {:.10}", gaussian_entropy(closed.matrix())?);
    println!("entropy found by the oracle   {:.10}", gaussian_entropy(brute.matrix())?);
    println!("max |closed - oracle| = {:.2e}", (closed.matrix() - brute.matrix()).amax());
    Ok(())
}
