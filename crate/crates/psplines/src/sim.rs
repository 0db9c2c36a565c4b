//! Monte-Carlo benchmark studies comparing the four estimator flavors:
//! (a) O-spline (quantile knots, derivative penalty), (b) standard P-spline
//! (uniform knots, unweighted differences), (c) naive P-spline (quantile
//! knots, unweighted differences) and (d) general P-spline (quantile knots,
//! weighted differences).
//!
//! Three study designs are built in: a U-shaped curve with uneven sampling, a
//! bimodal normal-mixture signal under two sampling schemes, and a family of
//! random splines observed under a "tent" density that concentrates around
//! local extrema.

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::fit::{self, EstimatorFlavor, FitConfig, FitResult, LambdaChoice};
use crate::knots::KnotVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Half-width of each triangular peak of the tent density.
pub const TENT_PEAK_HALF_WIDTH: f64 = 0.08;
/// Total mass in the peaks relative to the uniform floor.
pub const TENT_PEAK_FLOOR_MASS_RATIO: f64 = 4.0;

/// Which benchmark to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    UCurve,
    NormalMixture { scheme: u8 },
    RandomCurves,
}

/// The four estimator flavors under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    OSpline,
    Standard,
    Naive,
    General,
}

pub const ALL_ESTIMATORS: [EstimatorKind; 4] = [
    EstimatorKind::OSpline,
    EstimatorKind::Standard,
    EstimatorKind::Naive,
    EstimatorKind::General,
];

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::OSpline => "ospline",
            EstimatorKind::Standard => "standard",
            EstimatorKind::Naive => "naive",
            EstimatorKind::General => "general",
        }
    }
}

/// Full description of a study run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study: Study,
    /// Number of replicates N.
    pub replicates: usize,
    /// Sample size n per replicate.
    pub n: usize,
    /// B-spline order d of the estimators (and of the random signals).
    pub order: usize,
    /// Noise-to-signal ratio (random-curve study only).
    pub gamma: f64,
    pub seed: u64,
    /// Interior-knot count for the estimators; `None` picks the study default
    /// (98 for the U-curve, 30 for the mixtures, 29 d for random curves).
    pub interior_knots: Option<usize>,
    /// Penalty orders to attempt; `None` means m = 2 for the fixed-signal
    /// studies and all m in 1..d for random curves.
    pub penalty_orders: Option<Vec<usize>>,
    /// Run replicates on a thread pool. Results are bitwise identical either
    /// way because every replicate owns its own RNG stream, so this execution
    /// detail stays out of the serialized result.
    #[serde(default, skip_serializing)]
    pub parallel: bool,
}

impl StudyConfig {
    fn knot_count(&self) -> usize {
        self.interior_knots.unwrap_or(match self.study {
            Study::UCurve => 98,
            Study::NormalMixture { .. } => 30,
            Study::RandomCurves => 29 * self.order,
        })
    }

    fn orders(&self) -> Vec<usize> {
        match &self.penalty_orders {
            Some(ms) => ms.clone(),
            None => match self.study {
                Study::RandomCurves => (1..self.order).collect(),
                _ => vec![2],
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicate count must be positive".into()));
        }
        if self.order < 2 {
            return Err(Error::Config("order must be at least 2".into()));
        }
        if self.n < 2 {
            return Err(Error::Config("sample size must be at least 2".into()));
        }
        if let Study::NormalMixture { scheme } = self.study {
            if scheme != 1 && scheme != 2 {
                return Err(Error::Config(format!(
                    "mixture sampling scheme must be 1 or 2, got {scheme}"
                )));
            }
        }
        for &m in &self.orders() {
            if m == 0 || m >= self.order {
                return Err(Error::Config(format!(
                    "penalty order {m} is outside 1..{}",
                    self.order
                )));
            }
        }
        if self.study == Study::RandomCurves && !(self.gamma > 0.0) {
            return Err(Error::Config(
                "random-curve study needs a positive noise-to-signal ratio".into(),
            ));
        }
        Ok(())
    }
}

/// One (replicate, estimator, penalty order) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub estimator: EstimatorKind,
    pub penalty_order: usize,
    /// Relative MSE (1/n) Σ (f̂_i − g_i)² / σ².
    pub delta: f64,
    pub lambda: f64,
    pub edf: f64,
    /// Second derivative of the fit at x = 0 (mixture studies only), used to
    /// check whether the dip of the signal is captured.
    pub curvature_at_zero: Option<f64>,
}

/// A fit that could not be produced; the study continues without it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub replicate: usize,
    pub estimator: EstimatorKind,
    pub penalty_order: usize,
    pub message: String,
}

/// Median relative MSE over replicates for one estimator and penalty order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub estimator: EstimatorKind,
    pub penalty_order: usize,
    pub median_delta: f64,
    pub replicates_used: usize,
}

/// Everything a study run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub records: Vec<ReplicateRecord>,
    pub failures: Vec<FailureRecord>,
    pub summary: Vec<SummaryEntry>,
    /// Noise standard deviation per replicate.
    pub sigmas: Vec<f64>,
    /// Signal values g(x_i) per replicate, kept so σ can be re-derived.
    pub signals: Vec<Vec<f64>>,
}

impl PartialEq for StudyConfig {
    fn eq(&self, other: &Self) -> bool {
        self.study == other.study
            && self.replicates == other.replicates
            && self.n == other.n
            && self.order == other.order
            && self.gamma == other.gamma
            && self.seed == other.seed
            && self.interior_knots == other.interior_knots
            && self.penalty_orders == other.penalty_orders
        // `parallel` is an execution detail, not part of the result identity.
    }
}

/// A random order-`d` spline on [0, 1]: uniform knots with `2d` interior
/// knots, `3d` coefficients drawn uniformly from [−1, 1].
#[derive(Debug, Clone)]
pub struct RandomSpline {
    pub basis: BasisSpec,
    pub coeffs: Vec<f64>,
    pub extrema: Vec<f64>,
}

impl RandomSpline {
    pub fn eval(&self, x: f64) -> f64 {
        self.basis.eval_spline(&self.coeffs, x, 0).unwrap_or(0.0)
    }
}

/// Draw a random spline signal from a fresh RNG seeded with `seed`.
pub fn random_spline(order: usize, seed: u64) -> Result<RandomSpline> {
    random_spline_with(order, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Draw a random spline signal from the caller's RNG stream.
pub fn random_spline_with(order: usize, rng: &mut impl Rng) -> Result<RandomSpline> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!(
            "order must be at least 2, got {order}"
        )));
    }
    let kv = KnotVector::place_uniform(0.0, 1.0, 2 * order, order)?;
    let basis = BasisSpec::new(kv);
    let coeffs: Vec<f64> = (0..3 * order).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let extrema = spline_extrema(&basis, &coeffs)?;
    Ok(RandomSpline {
        basis,
        coeffs,
        extrema,
    })
}

/// Local extrema of a spline: sign changes of f' on a fine grid, refined by
/// bisection until |f'| < 1e-10.
pub fn spline_extrema(basis: &BasisSpec, coeffs: &[f64]) -> Result<Vec<f64>> {
    let (a, b) = basis.knot_vector().domain();
    let grid = 1024;
    let deriv = |x: f64| basis.eval_spline(coeffs, x, 1);
    let mut extrema = Vec::new();
    let mut prev_x = a;
    let mut prev_d = deriv(a)?;
    for i in 1..=grid {
        let x = a + (b - a) * i as f64 / grid as f64;
        let dx = deriv(x)?;
        if prev_d == 0.0 && dx == 0.0 {
            // Flat stretch, not an isolated extremum.
        } else if prev_d * dx < 0.0 {
            let (mut lo, mut hi) = (prev_x, x);
            let mut dlo = prev_d;
            let mut mid = 0.5 * (lo + hi);
            for _ in 0..200 {
                mid = 0.5 * (lo + hi);
                let dm = deriv(mid)?;
                if dm.abs() < 1e-10 {
                    break;
                }
                if dlo * dm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    dlo = dm;
                }
            }
            extrema.push(mid);
        }
        prev_x = x;
        prev_d = dx;
    }
    Ok(extrema)
}

/// Piecewise-linear "tent" density on [0, 1] with triangular peaks at the
/// given abscissae; sampling goes through the exact piecewise-quadratic CDF.
#[derive(Debug, Clone)]
pub struct TentDensity {
    nodes: Vec<f64>,
    dens: Vec<f64>,
    cum: Vec<f64>,
}

impl TentDensity {
    pub fn new(extrema: &[f64]) -> Self {
        let w = TENT_PEAK_HALF_WIDTH;
        let mut nodes = vec![0.0, 1.0];
        for &e in extrema {
            for cand in [e - w, e, e + w] {
                if cand > 0.0 && cand < 1.0 {
                    nodes.push(cand);
                }
            }
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        // Unit-height bumps on top of a zero floor, to measure their mass.
        let bump = |x: f64| -> f64 {
            extrema
                .iter()
                .map(|&e| (1.0 - (x - e).abs() / w).max(0.0))
                .sum()
        };
        let bumps: Vec<f64> = nodes.iter().map(|&x| bump(x)).collect();
        let bump_mass: f64 = nodes
            .windows(2)
            .zip(bumps.windows(2))
            .map(|(xs, hs)| 0.5 * (hs[0] + hs[1]) * (xs[1] - xs[0]))
            .sum();
        // Floor height 1 carries mass 1; scale the peaks to the target ratio.
        let scale = if bump_mass > 0.0 {
            TENT_PEAK_FLOOR_MASS_RATIO / bump_mass
        } else {
            0.0
        };
        let total = 1.0 + scale * bump_mass;
        let dens: Vec<f64> = bumps.iter().map(|&h| (1.0 + scale * h) / total).collect();

        let mut cum = vec![0.0; nodes.len()];
        for i in 1..nodes.len() {
            cum[i] = cum[i - 1]
                + 0.5 * (dens[i - 1] + dens[i]) * (nodes[i] - nodes[i - 1]);
        }
        let last = *cum.last().unwrap();
        for c in cum.iter_mut() {
            *c /= last;
        }
        let norm = last;
        let dens = dens.into_iter().map(|d| d / norm).collect();
        Self { nodes, dens, cum }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 || x > 1.0 {
            return 0.0;
        }
        let i = match self
            .nodes
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => i.min(self.nodes.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.nodes.len() - 2),
        };
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let t = (x - x0) / (x1 - x0);
        self.dens[i] + t * (self.dens[i + 1] - self.dens[i])
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = match self
            .nodes
            .binary_search_by(|v| v.partial_cmp(&x).unwrap())
        {
            Ok(i) => i.min(self.nodes.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.nodes.len() - 2),
        };
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let dx = x - x0;
        let slope = (self.dens[i + 1] - self.dens[i]) / (x1 - x0);
        self.cum[i] + self.dens[i] * dx + 0.5 * slope * dx * dx
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = match self
            .cum
            .binary_search_by(|v| v.partial_cmp(&u).unwrap())
        {
            Ok(i) => return self.nodes[i.min(self.nodes.len() - 1)],
            Err(i) => i.saturating_sub(1).min(self.nodes.len() - 2),
        };
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let d0 = self.dens[i];
        let slope = (self.dens[i + 1] - d0) / (x1 - x0);
        let target = u - self.cum[i];
        // Solve d0 t + slope t²/2 = target for t in [0, x1 - x0].
        let disc = (d0 * d0 + 2.0 * slope * target).max(0.0);
        // Rationalized quadratic root: stable for either slope sign because
        // the denominator is a sum of nonnegative terms.
        let denom = d0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * target / denom } else { 0.0 };
        (x0 + t).clamp(x0, x1)
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.gen::<f64>())).collect()
    }
}

/// Draw `n` abscissae on [0, 1] from the tent density over `extrema`, with a
/// fresh RNG. No extrema means plain uniform sampling.
pub fn sample_tent(extrema: &[f64], n: usize, seed: u64) -> Vec<f64> {
    sample_tent_with(extrema, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_tent_with(extrema: &[f64], n: usize, rng: &mut impl Rng) -> Vec<f64> {
    if extrema.is_empty() {
        return (0..n).map(|_| rng.gen::<f64>()).collect();
    }
    TentDensity::new(extrema).sample(n, rng)
}

fn normal_pdf(x: f64, mu: f64, sd: f64) -> f64 {
    let z = (x - mu) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// The bimodal mixture signal: equal-weight normal densities at −1 (sd 0.5)
/// and +1 (sd 0.8), restricted to [−2, 2]. It dips to a local minimum near 0.
pub fn mixture_signal(x: f64) -> f64 {
    0.5 * normal_pdf(x, -1.0, 0.5) + 0.5 * normal_pdf(x, 1.0, 0.8)
}

fn signal_range(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=2000 {
        let v = g(a + (b - a) * i as f64 / 2000.0);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// Median of three independent uniforms, i.e. a Beta(2, 2) draw.
fn beta22(rng: &mut impl Rng) -> f64 {
    let mut u = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
    u.sort_by(|a, b| a.partial_cmp(b).unwrap());
    u[1]
}

fn sample_mixture_truncated(rng: &mut impl Rng) -> f64 {
    loop {
        let (mu, sd) = if rng.gen::<bool>() { (-1.0, 0.5) } else { (1.0, 0.8) };
        let x: f64 = mu + sd * rng.sample::<f64, _>(StandardNormal);
        if (-2.0..=2.0).contains(&x) {
            return x;
        }
    }
}

/// One replicate's data: abscissae, signal values, noisy observations, noise
/// level.
struct ReplicateData {
    x: Vec<f64>,
    g: Vec<f64>,
    y: Vec<f64>,
    sigma: f64,
    domain: (f64, f64),
}

fn make_replicate(cfg: &StudyConfig, replicate: usize) -> Result<ReplicateData> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(replicate as u64);
    let n = cfg.n;
    match cfg.study {
        Study::UCurve => {
            let g = |x: f64| x.abs().powi(3) / 8.0;
            let domain = (-3.0, 3.0);
            let mut x: Vec<f64> = (0..n)
                .map(|_| domain.0 + (domain.1 - domain.0) * beta22(&mut rng))
                .collect();
            x.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let gv: Vec<f64> = x.iter().map(|&xi| g(xi)).collect();
            let sigma = 0.1 * signal_range(g, domain.0, domain.1);
            let y: Vec<f64> = gv
                .iter()
                .map(|&gi| gi + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Ok(ReplicateData {
                x,
                g: gv,
                y,
                sigma,
                domain,
            })
        }
        Study::NormalMixture { scheme } => {
            let domain = (-2.0, 2.0);
            let mut x: Vec<f64> = (0..n)
                .map(|_| match scheme {
                    1 => domain.0 + (domain.1 - domain.0) * rng.gen::<f64>(),
                    _ => sample_mixture_truncated(&mut rng),
                })
                .collect();
            x.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let gv: Vec<f64> = x.iter().map(|&xi| mixture_signal(xi)).collect();
            let sigma = 0.1 * signal_range(mixture_signal, domain.0, domain.1);
            let y: Vec<f64> = gv
                .iter()
                .map(|&gi| gi + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Ok(ReplicateData {
                x,
                g: gv,
                y,
                sigma,
                domain,
            })
        }
        Study::RandomCurves => {
            let signal = random_spline_with(cfg.order, &mut rng)?;
            let mut x = sample_tent_with(&signal.extrema, n, &mut rng);
            x.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let gv: Vec<f64> = x.iter().map(|&xi| signal.eval(xi)).collect();
            let mean = gv.iter().sum::<f64>() / n as f64;
            let var = gv.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>()
                / (n as f64 - 1.0);
            let sigma = cfg.gamma * var.sqrt();
            let y: Vec<f64> = gv
                .iter()
                .map(|&gi| gi + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Ok(ReplicateData {
                x,
                g: gv,
                y,
                sigma,
                domain: (0.0, 1.0),
            })
        }
    }
}

struct ReplicateOutcome {
    records: Vec<ReplicateRecord>,
    failures: Vec<FailureRecord>,
    sigma: f64,
    signal: Vec<f64>,
}

fn run_replicate(cfg: &StudyConfig, replicate: usize) -> Result<ReplicateOutcome> {
    let data = make_replicate(cfg, replicate)?;
    let k = cfg.knot_count();
    let d = cfg.order;
    let want_curvature = matches!(cfg.study, Study::NormalMixture { .. });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &m in &cfg.orders() {
        for kind in ALL_ESTIMATORS {
            match run_fit(&data, k, d, m, kind) {
                Ok((basis, fitres)) => {
                    let delta = data
                        .g
                        .iter()
                        .zip(&fitres.fitted)
                        .map(|(g, f)| (f - g) * (f - g))
                        .sum::<f64>()
                        / (data.g.len() as f64 * data.sigma * data.sigma);
                    let curvature_at_zero = if want_curvature {
                        basis.eval_spline(&fitres.beta, 0.0, 2).ok()
                    } else {
                        None
                    };
                    records.push(ReplicateRecord {
                        replicate,
                        estimator: kind,
                        penalty_order: m,
                        delta,
                        lambda: fitres.lambda,
                        edf: fitres.edf,
                        curvature_at_zero,
                    });
                }
                Err(e) => failures.push(FailureRecord {
                    replicate,
                    estimator: kind,
                    penalty_order: m,
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok(ReplicateOutcome {
        records,
        failures,
        sigma: data.sigma,
        signal: data.g,
    })
}

fn run_fit(
    data: &ReplicateData,
    k: usize,
    d: usize,
    m: usize,
    kind: EstimatorKind,
) -> Result<(BasisSpec, FitResult)> {
    let (a, b) = data.domain;
    let kv = match kind {
        EstimatorKind::Standard => KnotVector::place_uniform(a, b, k, d)?,
        _ => KnotVector::place_quantile_clamped(&data.x, a, b, k, d)?,
    };
    let flavor = match kind {
        EstimatorKind::OSpline => EstimatorFlavor::Derivative,
        EstimatorKind::Standard | EstimatorKind::Naive => EstimatorFlavor::DifferenceStandard,
        EstimatorKind::General => EstimatorFlavor::DifferenceGeneral,
    };
    let basis = BasisSpec::new(kv.clone());
    let cfg = FitConfig {
        basis: basis.clone(),
        penalty: fit::penalty_for(&kv, m, flavor)?,
        lambda: LambdaChoice::default(),
    };
    let result = fit::solve(&data.x, &data.y, &cfg)?;
    Ok((basis, result))
}

fn median(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Run a full study. Replicates are independent and draw from per-replicate
/// RNG streams, so parallel and serial execution give identical results.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let outcomes: Vec<Result<ReplicateOutcome>> = if cfg.parallel {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|l| run_replicate(cfg, l))
            .collect()
    } else {
        (0..cfg.replicates).map(|l| run_replicate(cfg, l)).collect()
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut sigmas = Vec::new();
    let mut signals = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        records.extend(outcome.records);
        failures.extend(outcome.failures);
        sigmas.push(outcome.sigma);
        signals.push(outcome.signal);
    }

    let mut summary = Vec::new();
    for &m in &cfg.orders() {
        for kind in ALL_ESTIMATORS {
            let mut deltas: Vec<f64> = records
                .iter()
                .filter(|r| r.estimator == kind && r.penalty_order == m)
                .map(|r| r.delta)
                .collect();
            let used = deltas.len();
            summary.push(SummaryEntry {
                estimator: kind,
                penalty_order: m,
                median_delta: median(&mut deltas),
                replicates_used: used,
            });
        }
    }

    Ok(StudyResult {
        config: cfg.clone(),
        records,
        failures,
        summary,
        sigmas,
        signals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_cfg(study: Study) -> StudyConfig {
        StudyConfig {
            study,
            replicates: 3,
            n: 120,
            order: 4,
            gamma: 0.1,
            seed: 7,
            interior_knots: Some(15),
            penalty_orders: Some(vec![2]),
            parallel: false,
        }
    }

    #[test]
    fn random_spline_dimensions() {
        let s = random_spline(4, 1).unwrap();
        assert_eq!(s.coeffs.len(), 12);
        assert_eq!(s.basis.knot_vector().num_interior(), 8);
        assert_eq!(s.basis.knot_vector().num_knots(), 16);
        let (a, b) = s.basis.knot_vector().domain();
        assert_eq!((a, b), (0.0, 1.0));
        for &e in &s.extrema {
            assert!(e > 0.0 && e < 1.0);
            let d1 = s.basis.eval_spline(&s.coeffs, e, 1).unwrap();
            assert!(d1.abs() < 1e-10, "f'({e}) = {d1}");
        }
    }

    #[test]
    fn constant_spline_has_no_extrema() {
        let kv = KnotVector::place_uniform(0.0, 1.0, 8, 4).unwrap();
        let basis = BasisSpec::new(kv);
        let coeffs = vec![0.7; 12];
        assert!(spline_extrema(&basis, &coeffs).unwrap().is_empty());
    }

    #[test]
    fn tent_cdf_quantile_round_trip() {
        let tent = TentDensity::new(&[0.21, 0.55, 0.8]);
        for i in 0..1000 {
            let u = (i as f64 + 0.5) / 1000.0;
            let x = tent.quantile(u);
            assert_abs_diff_eq!(tent.cdf(x), u, epsilon = 1e-12);
        }
        // Density integrates to one.
        let mut mass = 0.0;
        let steps = 20000;
        for i in 0..steps {
            let x = (i as f64 + 0.5) / steps as f64;
            mass += tent.pdf(x) / steps as f64;
        }
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn tent_without_extrema_is_uniform() {
        let x = sample_tent(&[], 4000, 11);
        let mut sorted = x.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let ks = sorted
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ecdf_hi = (i + 1) as f64 / n as f64;
                let ecdf_lo = i as f64 / n as f64;
                (v - ecdf_lo).abs().max((ecdf_hi - v).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 2.0 / (n as f64).sqrt(), "KS distance {ks}");
    }

    #[test]
    fn tent_concentrates_at_the_peak() {
        let tent = TentDensity::new(&[0.5]);
        let ratio = tent.pdf(0.5) / tent.pdf(0.1);
        // Unit floor and a single w-wide triangle with 4x its mass gives a
        // peak height of 1 + 4/w relative to the floor.
        let expected = 1.0 + TENT_PEAK_FLOOR_MASS_RATIO / TENT_PEAK_HALF_WIDTH;
        assert_abs_diff_eq!(ratio, expected, epsilon = 1e-9);

        let sample = tent.sample(20000, &mut ChaCha8Rng::seed_from_u64(3));
        let near_peak = sample
            .iter()
            .filter(|&&v| (v - 0.5).abs() < TENT_PEAK_HALF_WIDTH)
            .count() as f64;
        let near_edge = sample.iter().filter(|&&v| v < 0.16).count() as f64;
        let expected_ratio = (tent.cdf(0.58) - tent.cdf(0.42)) / tent.cdf(0.16);
        let observed = near_peak / near_edge;
        assert!(
            (observed / expected_ratio - 1.0).abs() < 0.3,
            "observed {observed}, expected {expected_ratio}"
        );
    }

    #[test]
    fn ucurve_study_is_reproducible_and_sane() {
        let cfg = small_cfg(Study::UCurve);
        let first = run_study(&cfg).unwrap();
        let second = run_study(&cfg).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.records.len(), 3 * 4);
        assert!(first.failures.is_empty());
        for r in &first.records {
            assert!(r.delta >= 0.0 && r.delta.is_finite());
        }
        let mut parallel_cfg = cfg.clone();
        parallel_cfg.parallel = true;
        let third = run_study(&parallel_cfg).unwrap();
        assert_eq!(first, third);
    }

    #[test]
    fn mixture_study_records_curvature() {
        let cfg = small_cfg(Study::NormalMixture { scheme: 2 });
        let out = run_study(&cfg).unwrap();
        for r in &out.records {
            assert!(r.curvature_at_zero.is_some());
        }
    }

    #[test]
    fn random_curve_sigma_matches_logged_signals() {
        let mut cfg = small_cfg(Study::RandomCurves);
        cfg.interior_knots = Some(20);
        let out = run_study(&cfg).unwrap();
        for (l, signal) in out.signals.iter().enumerate() {
            let n = signal.len() as f64;
            let mean = signal.iter().sum::<f64>() / n;
            let var = signal.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (n - 1.0);
            assert_eq!(out.sigmas[l], cfg.gamma * var.sqrt());
        }
    }

    #[test]
    fn mixture_scheme_is_validated() {
        let cfg = small_cfg(Study::NormalMixture { scheme: 3 });
        assert!(run_study(&cfg).is_err());
    }
}
