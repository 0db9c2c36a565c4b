//! Place uniform and quantile-based knot sequences and inspect their
//! diagnostics.
//!
//! Run with: cargo run --example knot_placement

use psplines::KnotVector;

fn main() -> psplines::Result<()> {
    // Cubic splines (order 4) with 5 interior knots on [0, 10].
    let uniform = KnotVector::place_uniform(0.0, 10.0, 5, 4)?;
    println!("uniform knots: {:?}", uniform.knots());
    println!("diagnostics: {:#?}", uniform.diagnostics());

    // Quantile placement follows the data density: most observations sit in
    // the left half, so knots crowd there too.
    let data: Vec<f64> = (0..500)
        .map(|i| {
            let u = i as f64 / 499.0;
            10.0 * u * u
        })
        .collect();
    let quantile = KnotVector::place_quantile_clamped(&data, 0.0, 10.0, 5, 4)?;
    println!("\nquantile knots: {:?}", quantile.knots());
    println!(
        "basis functions: {}, domain: {:?}",
        quantile.num_basis(),
        quantile.domain()
    );
    Ok(())
}
