//! Evaluate a B-spline basis row by row, check the partition of unity, and
//! differentiate a spline analytically.
//!
//! Run with: cargo run --example basis_evaluation

use psplines::basis::BasisSpec;
use psplines::KnotVector;

fn main() -> psplines::Result<()> {
    let kv = KnotVector::place_uniform(0.0, 1.0, 6, 4)?;
    let basis = BasisSpec::new(kv);

    // Each row is sparse: at most d = 4 consecutive nonzero basis functions.
    let row = basis.eval_row(0.37)?;
    println!(
        "at x = 0.37 the active functions start at index {} with values {:?}",
        row.offset, row.values
    );
    let sum: f64 = row.values.iter().sum();
    println!("partition of unity: sum = {sum:.16}");

    // A spline and its derivatives. With all-equal coefficients the spline is
    // constant, so the first derivative vanishes identically.
    let flat = vec![2.5; basis.num_basis()];
    println!("\nconstant spline at 0.6: {}", basis.eval_spline(&flat, 0.6, 0)?);
    println!("its derivative at 0.6: {}", basis.eval_spline(&flat, 0.6, 1)?);

    // Coefficients at the Greville abscissae reproduce the identity map, so
    // the first derivative is 1 everywhere.
    let line = psplines::basis::greville_abscissae(basis.knot_vector());
    for x in [0.1, 0.5, 0.9] {
        println!(
            "f(x) = x check: f({x}) = {:.12}, f'({x}) = {:.12}",
            basis.eval_spline(&line, x, 0)?,
            basis.eval_spline(&line, x, 1)?
        );
    }
    Ok(())
}
