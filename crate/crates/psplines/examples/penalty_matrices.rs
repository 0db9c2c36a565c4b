//! Build the weighted difference matrices, the derivative penalty via the
//! sandwich factorization, and its sparse root, on a small non-uniform knot
//! sequence with coincident boundary knots.
//!
//! Run with: cargo run --example penalty_matrices

use psplines::penalty;
use psplines::KnotVector;

fn print_dense(label: &str, m: &nalgebra::DMatrix<f64>) {
    println!("{label} ({} x {}):", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:8.4}", m[(r, c)])).collect();
        println!("  [{}]", row.join(", "));
    }
}

fn main() -> psplines::Result<()> {
    // Order 4 (cubic) basis on a clamped non-uniform sequence with six basis
    // functions.
    let kv = KnotVector::new(
        vec![0.0, 0.0, 0.0, 0.0, 1.0, 3.0, 4.0, 4.0, 4.0, 4.0],
        4,
    )?;

    for m in 1..4 {
        let diff = penalty::general_diff(&kv, m)?;
        print_dense(&format!("\nweighted difference matrix, order {m}"), &diff.to_dense());
    }

    // The exact integrated-squared-second-derivative penalty and its banded
    // root K with KᵀK = S.
    let pen = penalty::derivative_penalty(&kv, 2)?;
    print_dense("\nderivative penalty S", &pen.matrix().to_dense());
    print_dense("\nsparse root K", &pen.root().to_dense());
    let k = pen.root().to_dense();
    let reconstruction = (k.transpose() * &k - pen.matrix().to_dense()).amax();
    println!("\nmax |KᵀK - S| = {reconstruction:.3e}");

    // On equidistant knots the weighted matrix collapses to the classic
    // signed-binomial rows scaled by the step.
    let uniform = KnotVector::place_uniform(0.0, 1.0, 4, 4)?;
    let general = penalty::general_diff(&uniform, 2)?;
    print_dense("\nuniform-knot reduction (order 2)", &general.to_dense());
    Ok(())
}
