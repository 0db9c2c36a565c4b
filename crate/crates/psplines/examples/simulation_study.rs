//! Run a reduced U-shaped-curve benchmark and print the median relative MSE
//! of each estimator flavor. The naive combination (quantile knots with the
//! unweighted difference penalty) should come out worst.
//!
//! Run with: cargo run --release --example simulation_study

use psplines::sim::{run_study, Study, StudyConfig};

fn main() -> psplines::Result<()> {
    let cfg = StudyConfig {
        study: Study::UCurve,
        replicates: 20,
        n: 250,
        order: 4,
        gamma: 0.1,
        seed: 0,
        interior_knots: Some(40),
        penalty_orders: Some(vec![2]),
        parallel: true,
    };
    let result = run_study(&cfg)?;
    println!(
        "U-curve study: {} replicates, {} failures",
        cfg.replicates,
        result.failures.len()
    );
    for entry in &result.summary {
        println!(
            "  {:<9} m = {}: median relative MSE {:.4} ({} replicates)",
            entry.estimator.as_str(),
            entry.penalty_order,
            entry.median_delta,
            entry.replicates_used
        );
    }
    Ok(())
}
