//! End-to-end acceptance suite: runs every verification criterion and prints
//! one pass/fail line per criterion (visible with `--nocapture`).

#[test]
fn acceptance_criteria() {
    let results = psplines::verify::run_all(0);
    let mut failed = Vec::new();
    for r in &results {
        println!(
            "{} {} ({:.2}s) {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
        if !r.passed {
            failed.push(format!("{}: {}", r.name, r.detail));
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
