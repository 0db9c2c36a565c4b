//! Self-verification suite: independent numerical oracles for the penalty
//! construction, the fitting pipeline, and the simulation harness. Each check
//! returns a pass/fail record, so the suite can run from the CLI as well as
//! from the integration tests.

use crate::basis::BasisSpec;
use crate::error::Result;
use crate::fit::{self, EstimatorFlavor, FitConfig, LambdaChoice};
use crate::knots::KnotVector;
use crate::penalty;
use crate::sim::{self, EstimatorKind, Study, StudyConfig};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::time::Instant;

/// Outcome of one verification criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Exact integrated-squared-derivative penalty computed without the sandwich
/// factorization: on each knot interval the order-`d` basis functions are
/// degree d−1 polynomials, recovered by interpolation at Chebyshev nodes,
/// differentiated symbolically and integrated in closed form.
pub fn derivative_penalty_oracle(kv: &KnotVector, m: usize) -> Result<DMatrix<f64>> {
    let d = kv.order();
    let p = kv.num_basis();
    let basis = BasisSpec::new(kv.clone());
    let t = kv.knots();
    let big_k = t.len();
    let mut s = DMatrix::zeros(p, p);

    for span in (d - 1)..(big_k - d) {
        let (lo, hi) = (t[span], t[span + 1]);
        if hi <= lo {
            continue;
        }
        let h = hi - lo;
        let mid = 0.5 * (lo + hi);
        // Work in w = 2 (x - mid) / h ∈ [−1, 1] to keep the Vandermonde
        // system well conditioned.
        let nodes: Vec<f64> = (0..d)
            .map(|j| ((2 * j + 1) as f64 * std::f64::consts::PI / (2 * d) as f64).cos())
            .collect();
        let mut vander = DMatrix::zeros(d, d);
        for (r, &w) in nodes.iter().enumerate() {
            let mut pw = 1.0;
            for c in 0..d {
                vander[(r, c)] = pw;
                pw *= w;
            }
        }
        let mut samples = DMatrix::zeros(d, d);
        let mut offset = 0;
        for (r, &w) in nodes.iter().enumerate() {
            let x = mid + 0.5 * h * w;
            let row = basis.eval_row(x)?;
            offset = row.offset;
            for (c, &v) in row.values.iter().enumerate() {
                samples[(r, c)] = v;
            }
        }
        // Monomial coefficients in w of each active basis function.
        let coeffs = vander
            .lu()
            .solve(&samples)
            .expect("Chebyshev Vandermonde is nonsingular");

        // m-th x-derivative of w^k has monomial coefficients
        // (2/h)^m k!/(k−m)! w^(k−m).
        let scale = (2.0 / h).powi(m as i32);
        let mut deriv = DMatrix::zeros(d, d);
        for c in 0..d {
            for k in m..d {
                let mut fall = 1.0;
                for q in 0..m {
                    fall *= (k - q) as f64;
                }
                deriv[(k - m, c)] = coeffs[(k, c)] * fall * scale;
            }
        }
        // ∫ w^a w^b over [−1, 1] times the Jacobian h/2.
        for c1 in 0..d {
            for c2 in 0..d {
                let mut integral = 0.0;
                for k1 in 0..d - m {
                    for k2 in 0..d - m {
                        if (k1 + k2) % 2 == 0 {
                            integral += deriv[(k1, c1)] * deriv[(k2, c2)] * 2.0
                                / (k1 + k2 + 1) as f64;
                        }
                    }
                }
                s[(offset + c1, offset + c2)] += integral * 0.5 * h;
            }
        }
    }
    Ok(s)
}

/// Relative Frobenius deviation between the sandwich-built penalty and the
/// interpolation oracle.
pub fn sandwich_deviation(kv: &KnotVector, m: usize) -> Result<f64> {
    let pen = penalty::derivative_penalty(kv, m)?;
    let s = pen.matrix().to_dense();
    let oracle = derivative_penalty_oracle(kv, m)?;
    Ok((&s - &oracle).norm() / oracle.norm())
}

fn random_knot_vector(rng: &mut impl Rng, d: usize, k: usize) -> KnotVector {
    loop {
        let mut interior: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..0.95)).collect();
        interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ok = interior
            .windows(2)
            .all(|w| w[1] - w[0] > 0.02)
            && interior.first().map_or(true, |&v| v > 0.02)
            && interior.last().map_or(true, |&v| v < 0.98);
        if !ok {
            continue;
        }
        let mut t = vec![0.0; d];
        t.extend_from_slice(&interior);
        t.extend(std::iter::repeat(1.0).take(d));
        return KnotVector::new(t, d).unwrap();
    }
}

fn check(name: &'static str, body: impl FnOnce() -> (bool, String)) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = body();
    CriterionResult {
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn fail(name: &'static str, err: impl std::fmt::Display, start: Instant) -> CriterionResult {
    CriterionResult {
        name,
        passed: false,
        detail: format!("error: {err}"),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn worked_example_knots() -> KnotVector {
    KnotVector::new(
        vec![0.0, 0.0, 0.0, 0.0, 1.0, 3.0, 4.0, 4.0, 4.0, 4.0],
        4,
    )
    .unwrap()
}

const GOLDEN_D1: [[f64; 2]; 5] = [
    [-3.0, 3.0],
    [-1.0, 1.0],
    [-0.75, 0.75],
    [-1.0, 1.0],
    [-3.0, 3.0],
];
const GOLDEN_D2: [[f64; 3]; 4] = [
    [6.0, -8.0, 2.0],
    [2.0 / 3.0, -7.0 / 6.0, 0.5],
    [0.5, -7.0 / 6.0, 2.0 / 3.0],
    [2.0, -8.0, 6.0],
];
const GOLDEN_D3: [[f64; 4]; 3] = [
    [-6.0, 26.0 / 3.0, -19.0 / 6.0, 0.5],
    [-1.0 / 3.0, 5.0 / 6.0, -5.0 / 6.0, 1.0 / 3.0],
    [-0.5, 19.0 / 6.0, -26.0 / 3.0, 6.0],
];

fn criterion_golden_general() -> CriterionResult {
    check("general-difference golden matrices", || {
        let kv = worked_example_knots();
        let mut worst = 0.0f64;
        let compare = |diff: &penalty::DiffMatrix, rows: &[&[f64]], worst: &mut f64| {
            let dense = diff.to_dense();
            for (r, row) in rows.iter().enumerate() {
                for (c, &want) in row.iter().enumerate() {
                    let got = dense[(r, r + c)];
                    *worst = worst.max((got - want).abs());
                }
            }
        };
        let d1 = penalty::general_diff(&kv, 1).unwrap();
        let d2 = penalty::general_diff(&kv, 2).unwrap();
        let d3 = penalty::general_diff(&kv, 3).unwrap();
        compare(&d1, &GOLDEN_D1.iter().map(|r| r.as_slice()).collect::<Vec<_>>(), &mut worst);
        compare(&d2, &GOLDEN_D2.iter().map(|r| r.as_slice()).collect::<Vec<_>>(), &mut worst);
        compare(&d3, &GOLDEN_D3.iter().map(|r| r.as_slice()).collect::<Vec<_>>(), &mut worst);
        (worst < 1e-12, format!("max entry deviation {worst:.3e}"))
    })
}

fn criterion_standard_matrices() -> CriterionResult {
    check("standard difference matrices", || {
        let mut exact = true;
        let d1 = penalty::standard_diff(5, 1).unwrap().to_dense();
        for r in 0..4 {
            exact &= d1[(r, r)] == -1.0 && d1[(r, r + 1)] == 1.0;
        }
        let d2 = penalty::standard_diff(6, 2).unwrap().to_dense();
        for r in 0..4 {
            exact &= d2[(r, r)] == 1.0 && d2[(r, r + 1)] == -2.0 && d2[(r, r + 2)] == 1.0;
        }
        let d3 = penalty::standard_diff(7, 3).unwrap().to_dense();
        for r in 0..4 {
            exact &= d3[(r, r)] == -1.0
                && d3[(r, r + 1)] == 3.0
                && d3[(r, r + 2)] == -3.0
                && d3[(r, r + 3)] == 1.0;
        }
        (exact, "signed binomial rows reproduced exactly".into())
    })
}

fn criterion_sandwich(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = rng.gen_range(2..=6usize);
        let m = rng.gen_range(1..d);
        let k = rng.gen_range(0..=8usize);
        let kv = random_knot_vector(&mut rng, d, k);
        match sandwich_deviation(&kv, m) {
            Ok(dev) => worst = worst.max(dev),
            Err(e) => return fail("sandwich formula vs interpolation oracle", e, start),
        }
    }
    CriterionResult {
        name: "sandwich formula vs interpolation oracle",
        passed: worst < 1e-8,
        detail: format!("50 random configs, worst relative deviation {worst:.3e}"),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_sparse_root(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0726_0726);
    let mut worst_gap = 0.0f64;
    let mut structure_ok = true;
    let mut rank_ok = true;
    for _ in 0..20 {
        let d = rng.gen_range(2..=6usize);
        let m = rng.gen_range(1..d);
        let k = rng.gen_range(0..=8usize);
        let kv = random_knot_vector(&mut rng, d, k);
        let p = kv.num_basis();
        let pen = match penalty::derivative_penalty(&kv, m) {
            Ok(p) => p,
            Err(e) => return fail("sparse root of the derivative penalty", e, start),
        };
        let root = pen.root().to_dense();
        let s = pen.matrix().to_dense();
        let gap = (root.transpose() * &root - &s).amax()
            / s.amax().max(1.0);
        worst_gap = worst_gap.max(gap);
        // Root is (p−m)×p with every nonzero within d super-diagonals.
        structure_ok &= root.nrows() == p - m && root.ncols() == p;
        for r in 0..root.nrows() {
            for c in 0..root.ncols() {
                if (c < r || c > r + d) && root[(r, c)] != 0.0 {
                    structure_ok = false;
                }
            }
        }
        let sv = root.svd(false, false).singular_values;
        let max_sv = sv.max();
        let rank = sv.iter().filter(|&&v| v > 1e-10 * max_sv).count();
        rank_ok &= rank == p - m;
    }
    CriterionResult {
        name: "sparse root of the derivative penalty",
        passed: worst_gap < 1e-10 && structure_ok && rank_ok,
        detail: format!(
            "worst relative |KᵀK − S| {worst_gap:.3e}, structure ok {structure_ok}, rank ok {rank_ok}"
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_null_space_limit(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 88);
    let n = 400;
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            let mut u = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
            u.sort_by(|a, b| a.partial_cmp(b).unwrap());
            -3.0 + 6.0 * u[1]
        })
        .collect();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let y: Vec<f64> = x
        .iter()
        .map(|&xi| xi + 0.2 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let nf = n as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(u, v)| u * v).sum();
    let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    let intercept = (sy - slope * sx) / nf;

    let mut detail = String::new();
    let mut passed = true;
    for k in [10usize, 50] {
        let kv =
            match KnotVector::place_quantile_clamped(&x, x[0], x[n - 1], k, 4) {
                Ok(kv) => kv,
                Err(e) => return fail("null-space limiting behavior", e, start),
            };
        let sup_for = |flavor: EstimatorFlavor| -> Result<f64> {
            let cfg = FitConfig {
                basis: BasisSpec::new(kv.clone()),
                penalty: fit::penalty_for(&kv, 2, flavor)?,
                lambda: LambdaChoice::Fixed(1e8),
            };
            let fitres = fit::solve(&x, &y, &cfg)?;
            Ok(x.iter()
                .zip(&fitres.fitted)
                .map(|(&xi, &f)| (f - (intercept + slope * xi)).abs())
                .fold(0.0f64, f64::max))
        };
        let general = match sup_for(EstimatorFlavor::DifferenceGeneral) {
            Ok(v) => v,
            Err(e) => return fail("null-space limiting behavior", e, start),
        };
        let standard = match sup_for(EstimatorFlavor::DifferenceStandard) {
            Ok(v) => v,
            Err(e) => return fail("null-space limiting behavior", e, start),
        };
        passed &= general < 1e-3 && standard > 1e-2;
        detail.push_str(&format!(
            "k={k}: general gap {general:.3e}, standard gap {standard:.3e}; "
        ));
    }
    CriterionResult {
        name: "null-space limiting behavior",
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_uniform_reduction() -> CriterionResult {
    check("uniform reduction of the general difference matrix", || {
        let mut worst = 0.0f64;
        for d in 2..=6usize {
            for m in 1..d {
                let kv = KnotVector::place_uniform(0.0, 2.5, 7, d).unwrap();
                let h: f64 = 2.5 / 8.0;
                let general = penalty::general_diff(&kv, m).unwrap().to_dense();
                let standard = penalty::standard_diff(kv.num_basis(), m)
                    .unwrap()
                    .to_dense();
                let scaled = standard * h.powi(-(m as i32));
                let scale = scaled.amax();
                worst = worst.max((&general - &scaled).amax() / scale);
            }
        }
        (worst < 1e-12, format!("worst relative deviation {worst:.3e}"))
    })
}

fn criterion_edf_limits(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3_141);
    let mut x: Vec<f64> = (0..200)
        .map(|i| 9.0 * (i as f64 + rng.gen::<f64>()) / 200.0)
        .collect();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kv = KnotVector::place_uniform(0.0, 9.0, 8, 4).unwrap();
    let cfg = FitConfig {
        basis: BasisSpec::new(kv.clone()),
        penalty: match fit::penalty_for(&kv, 2, EstimatorFlavor::DifferenceGeneral) {
            Ok(p) => p,
            Err(e) => return fail("edf limits and monotonicity", e, start),
        },
        lambda: LambdaChoice::default(),
    };
    let p = cfg.basis.num_basis() as f64;
    let low = match fit::edf(&x, &cfg, 1e-10) {
        Ok(v) => v,
        Err(e) => return fail("edf limits and monotonicity", e, start),
    };
    let high = match fit::edf(&x, &cfg, 1e12) {
        Ok(v) => v,
        Err(e) => return fail("edf limits and monotonicity", e, start),
    };
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for i in 0..41 {
        let lambda = 10f64.powf(-8.0 + 16.0 * i as f64 / 40.0);
        match fit::edf(&x, &cfg, lambda) {
            Ok(e) => {
                monotone &= e <= prev + 1e-10;
                prev = e;
            }
            Err(e) => return fail("edf limits and monotonicity", e, start),
        }
    }
    let passed = (low - p).abs() < 1e-3 && (high - 2.0).abs() < 1e-2 && monotone;
    CriterionResult {
        name: "edf limits and monotonicity",
        passed,
        detail: format!(
            "edf(1e-10) = {low:.6} (p = {p}), edf(1e12) = {high:.6}, monotone {monotone}"
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn median_of(result: &sim::StudyResult, kind: EstimatorKind, m: usize) -> f64 {
    result
        .summary
        .iter()
        .find(|s| s.estimator == kind && s.penalty_order == m)
        .map(|s| s.median_delta)
        .unwrap_or(f64::NAN)
}

fn criterion_ucurve(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let cfg = StudyConfig {
        study: Study::UCurve,
        replicates: 100,
        n: 300,
        order: 4,
        gamma: 0.1,
        seed,
        interior_knots: None,
        penalty_orders: Some(vec![2]),
        parallel: true,
    };
    let result = match sim::run_study(&cfg) {
        Ok(r) => r,
        Err(e) => return fail("U-curve study ordering", e, start),
    };
    let naive = median_of(&result, EstimatorKind::Naive, 2);
    let others = [
        (EstimatorKind::OSpline, median_of(&result, EstimatorKind::OSpline, 2)),
        (EstimatorKind::Standard, median_of(&result, EstimatorKind::Standard, 2)),
        (EstimatorKind::General, median_of(&result, EstimatorKind::General, 2)),
    ];
    let passed = others.iter().all(|&(_, v)| naive > v) && result.failures.is_empty();
    CriterionResult {
        name: "U-curve study ordering",
        passed,
        detail: format!(
            "median delta: naive {naive:.4}, ospline {:.4}, standard {:.4}, general {:.4}, failures {}",
            others[0].1,
            others[1].1,
            others[2].1,
            result.failures.len()
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_random_curves(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let cfg = StudyConfig {
        study: Study::RandomCurves,
        replicates: 30,
        n: 1000,
        order: 4,
        gamma: 0.1,
        seed,
        interior_knots: None,
        penalty_orders: Some(vec![2]),
        parallel: true,
    };
    let result = match sim::run_study(&cfg) {
        Ok(r) => r,
        Err(e) => return fail("random-curve study parity", e, start),
    };
    let a = median_of(&result, EstimatorKind::OSpline, 2);
    let b = median_of(&result, EstimatorKind::Standard, 2);
    let d = median_of(&result, EstimatorKind::General, 2);
    let c = median_of(&result, EstimatorKind::Naive, 2);
    let mut ratios_ok = true;
    for (u, v) in [(a, b), (a, d), (b, d)] {
        let r = u / v;
        ratios_ok &= (0.8..=1.25).contains(&r);
    }
    let naive_above = c > a && c > b && c > d;
    CriterionResult {
        name: "random-curve study parity",
        passed: ratios_ok && naive_above,
        detail: format!(
            "medians: ospline {a:.4}, standard {b:.4}, general {d:.4}, naive {c:.4}"
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_derivative_fd(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = rng.gen_range(2..=6usize);
        let k = rng.gen_range(1..=8usize);
        let kv = random_knot_vector(&mut rng, d, k);
        let basis = BasisSpec::new(kv.clone());
        let beta: Vec<f64> = (0..kv.num_basis())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let t = kv.knots();
        let h = 1e-6;
        for span in (d - 1)..(t.len() - d) {
            if t[span + 1] <= t[span] {
                continue;
            }
            let mid = 0.5 * (t[span] + t[span + 1]);
            let analytic = match basis.eval_spline(&beta, mid, 1) {
                Ok(v) => v,
                Err(e) => return fail("analytic first derivative vs finite differences", e, start),
            };
            let plus = basis.eval_spline(&beta, mid + h, 0).unwrap();
            let minus = basis.eval_spline(&beta, mid - h, 0).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            worst = worst.max((analytic - fd).abs());
        }
    }
    CriterionResult {
        name: "analytic first derivative vs finite differences",
        passed: worst < 1e-6,
        detail: format!("200 random coefficient vectors, worst deviation {worst:.3e}"),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_determinism(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let base = StudyConfig {
        study: Study::RandomCurves,
        replicates: 6,
        n: 200,
        order: 4,
        gamma: 0.1,
        seed,
        interior_knots: Some(30),
        penalty_orders: Some(vec![2]),
        parallel: false,
    };
    let serial = sim::run_study(&base);
    let mut par_cfg = base.clone();
    par_cfg.parallel = true;
    let parallel = sim::run_study(&par_cfg);
    match (serial, parallel) {
        (Ok(s), Ok(p)) => {
            let s_json = serde_json::to_string(&s).unwrap();
            let p_json = serde_json::to_string(&p).unwrap();
            CriterionResult {
                name: "serial vs parallel determinism",
                passed: s_json == p_json,
                detail: format!("serialized results identical: {}", s_json == p_json),
                seconds: start.elapsed().as_secs_f64(),
            }
        }
        (Err(e), _) | (_, Err(e)) => fail("serial vs parallel determinism", e, start),
    }
}

/// Run every acceptance check. Seeded; the full suite takes a few minutes
/// because it includes the two Monte-Carlo studies.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    vec![
        criterion_golden_general(),
        criterion_standard_matrices(),
        criterion_sandwich(seed),
        criterion_sparse_root(seed),
        criterion_null_space_limit(seed),
        criterion_uniform_reduction(),
        criterion_edf_limits(seed),
        criterion_ucurve(seed),
        criterion_random_curves(seed),
        criterion_derivative_fd(seed),
        criterion_determinism(seed),
    ]
}

/// The quick subset: everything except the two Monte-Carlo studies.
pub fn run_quick(seed: u64) -> Vec<CriterionResult> {
    vec![
        criterion_golden_general(),
        criterion_standard_matrices(),
        criterion_sandwich(seed),
        criterion_sparse_root(seed),
        criterion_null_space_limit(seed),
        criterion_uniform_reduction(),
        criterion_edf_limits(seed),
        criterion_derivative_fd(seed),
        criterion_determinism(seed),
    ]
}
