//! Maximum-entropy completion of a partially specified band matrix.
//!
//! cargo run --example band_completion

use nalgebra::DMatrix;
use stable_spline::kernel::build_kernel;
use stable_spline::maxent::{central_extension, factored_extension, PartialBandMatrix};

fn main() -> stable_spline::Result<()> {
    // Only the main diagonal and first off-diagonal of the TC moments are known.
    let p = PartialBandMatrix::tc_moments(6, 0.7)?;
    let c = central_extension(&p)?;
    let k = build_kernel(6, 0.7, 1.0)?;
    println!("completion =\n{}", c.matrix());
    println!("max |C - K| = {:.2e}", (c.matrix() - &k).amax());
    println!("off-band |C⁻¹| / max |C⁻¹| = {:.2e}", c.off_band_inverse_ratio()?);

    // Inverse factor pair C⁻¹ = L V Lᵀ, read straight off the band.
    let f = factored_extension(&p)?;
    println!("V = {:?}", f.v());
    println!("|L V Lᵀ C - I| = {:.2e}", (f.inverse_matrix() * c.matrix() - DMatrix::identity(6, 6)).amax());
    println!("log det C = {:.12} = {:.12}", c.log_det()?, f.log_det_covariance());

    // A 2-band example from JSON.
    let text = r#"{"n":5,"m":2,"diagonals":[[2,2,2,2,2],[0.8,0.6,0.9,0.5],[0.3,0.1,0.2]]}"#;
    let q = stable_spline::io::parse_band(text)?;
    println!("2-band completion =\n{}", central_extension(&q)?.matrix());

    // Infeasible data: the second 2x2 block is indefinite.
    let bad = PartialBandMatrix::new(3, 1, vec![vec![1.0, 1.0, 1.0], vec![0.5, 1.5]])?;
    match central_extension(&bad) {
        Ok(_) => unreachable!(),
        Err(e) => println!("infeasible: {e} (exit code {})", e.exit_code()),
    }
    Ok(())
}
