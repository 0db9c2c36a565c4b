//! Knot sequences for B-spline bases.
//!
//! A full knot sequence holds `K = k + 2d` nondecreasing abscissae: `k` interior
//! knots strictly inside the domain `(a, b)`, the two domain boundaries, and
//! `d - 1` auxiliary knots beyond each boundary (possibly coalesced onto the
//! boundary, which yields a clamped basis). The basis then has `p = k + d`
//! B-splines of order `d`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Full nondecreasing knot sequence together with the spline order `d`.
///
/// Immutable after construction; the domain is `[t[d-1], t[K-d]]` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    t: Vec<f64>,
    d: usize,
}

/// Structured report produced by [`KnotVector::diagnostics`].
#[derive(Debug, Clone, Serialize)]
pub struct KnotDiagnostics {
    pub num_knots: usize,
    pub num_interior: usize,
    pub num_basis: usize,
    pub order: usize,
    pub domain: (f64, f64),
    /// Distinct knot values with their multiplicities, in increasing order.
    pub multiplicity: Vec<(f64, usize)>,
    pub violations: Vec<String>,
}

impl KnotDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl KnotVector {
    /// Build a knot vector from a raw sequence, rejecting invariant violations.
    pub fn new(t: Vec<f64>, d: usize) -> Result<Self> {
        let kv = Self { t, d };
        let diag = kv.diagnostics();
        if let Some(v) = diag.violations.first() {
            return Err(Error::InvalidKnots(v.clone()));
        }
        Ok(kv)
    }

    /// Equidistant domain knots with step `(b - a) / (k + 1)`, auxiliary knots
    /// continuing the same step outward.
    pub fn place_uniform(a: f64, b: f64, k: usize, d: usize) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite domain bounds [{a}, {b}]"
            )));
        }
        if a >= b {
            return Err(Error::InvalidArgument(format!(
                "domain bounds must satisfy a < b, got [{a}, {b}]"
            )));
        }
        if d < 1 {
            return Err(Error::InvalidArgument("spline order d must be >= 1".into()));
        }
        let h = (b - a) / (k + 1) as f64;
        let cap_k = k + 2 * d;
        let t: Vec<f64> = (0..cap_k)
            .map(|j| a + (j as f64 - (d - 1) as f64) * h)
            .collect();
        Self::new(t, d)
    }

    /// Domain knots at equal quantiles of the boundary-clamped sample, with the
    /// boundary knots duplicated `d` times at `a` and `b`.
    ///
    /// The sample is clamped by replacing its extremes with `min(a, x[0])` and
    /// `max(b, x[n-1])`; quantiles use linear interpolation of order statistics.
    /// Tied interior quantiles are an error rather than being deduplicated,
    /// since interior multiplicity would change the spline continuity class.
    pub fn place_quantile_clamped(x: &[f64], a: f64, b: f64, k: usize, d: usize) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::InvalidArgument(format!(
                "domain bounds must be finite with a < b, got [{a}, {b}]"
            )));
        }
        if d < 1 {
            return Err(Error::InvalidArgument("spline order d must be >= 1".into()));
        }
        if x.len() < 2 {
            return Err(Error::InvalidArgument(
                "quantile knot placement needs at least 2 sample points".into(),
            ));
        }
        if x.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("sample must be sorted".into()));
        }
        let mut s = x.to_vec();
        s[0] = a.min(x[0]);
        let n = s.len();
        s[n - 1] = b.max(x[n - 1]);

        let quantile = |level: f64| -> f64 {
            let h = (n - 1) as f64 * level;
            let i = (h.floor() as usize).min(n - 2);
            let frac = h - i as f64;
            s[i] + frac * (s[i + 1] - s[i])
        };

        let mut interior = Vec::with_capacity(k);
        for j in 1..=k {
            interior.push(quantile(j as f64 / (k + 1) as f64));
        }
        // Interior knots must be strictly increasing and strictly inside (a, b).
        for j in 0..=k {
            let (lo, lvl_lo) = if j == 0 {
                (a, 0.0)
            } else {
                (interior[j - 1], j as f64 / (k + 1) as f64)
            };
            let (hi, lvl_hi) = if j == k {
                (b, 1.0)
            } else {
                (interior[j], (j + 1) as f64 / (k + 1) as f64)
            };
            if lo >= hi {
                return Err(Error::TiedQuantiles {
                    level_lo: lvl_lo,
                    level_hi: lvl_hi,
                    value: lo,
                });
            }
        }

        let mut t = Vec::with_capacity(k + 2 * d);
        t.extend(std::iter::repeat(a).take(d));
        t.extend(interior);
        t.extend(std::iter::repeat(b).take(d));
        Self::new(t, d)
    }

    pub fn knots(&self) -> &[f64] {
        &self.t
    }

    /// Spline order `d` (degree `d - 1`).
    pub fn order(&self) -> usize {
        self.d
    }

    /// Total knot count `K`.
    pub fn num_knots(&self) -> usize {
        self.t.len()
    }

    /// Number of B-splines `p = K - d`.
    pub fn num_basis(&self) -> usize {
        self.t.len() - self.d
    }

    /// Interior knot count `k = K - 2d`.
    pub fn num_interior(&self) -> usize {
        self.t.len() - 2 * self.d
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t[self.d - 1], self.t[self.t.len() - self.d])
    }

    /// Drop `m` knots from each end and lower the order by `m`. The result
    /// carries the order-`(d - m)` B-splines that are nonzero on the domain.
    pub fn trim(&self, m: usize) -> Result<KnotVector> {
        if m >= self.d {
            return Err(Error::InvalidArgument(format!(
                "cannot trim {m} levels from an order-{} knot vector",
                self.d
            )));
        }
        KnotVector::new(self.t[m..self.t.len() - m].to_vec(), self.d - m)
    }

    /// Report bookkeeping quantities and any invariant violations.
    pub fn diagnostics(&self) -> KnotDiagnostics {
        let t = &self.t;
        let d = self.d;
        let cap_k = t.len();
        let mut violations = Vec::new();

        if d < 1 {
            violations.push("order d must be >= 1".to_string());
        }
        if cap_k < 2 * d.max(1) {
            violations.push(format!(
                "need at least 2d = {} knots, got {}",
                2 * d,
                cap_k
            ));
        }
        if t.iter().any(|v| !v.is_finite()) {
            violations.push("knots must be finite".to_string());
        }
        if t.windows(2).any(|w| w[0] > w[1]) {
            violations.push("not nondecreasing".to_string());
        }

        let mut multiplicity: Vec<(f64, usize)> = Vec::new();
        for &v in t {
            match multiplicity.last_mut() {
                Some((last, c)) if *last == v => *c += 1,
                _ => multiplicity.push((v, 1)),
            }
        }
        if let Some(&(v, c)) = multiplicity.iter().find(|&&(_, c)| c > d) {
            violations.push(format!(
                "multiplicity exceeds order: knot {v} repeated {c} times (order {d})"
            ));
        }

        let (a, b) = if cap_k >= 2 * d && d >= 1 {
            (t[d - 1], t[cap_k - d])
        } else {
            (f64::NAN, f64::NAN)
        };
        if a >= b {
            violations.push(format!("degenerate domain [{a}, {b}]"));
        }
        let num_interior = if cap_k >= 2 * d { cap_k - 2 * d } else { 0 };

        KnotDiagnostics {
            num_knots: cap_k,
            num_interior,
            num_basis: cap_k.saturating_sub(d),
            order: d,
            domain: (a, b),
            multiplicity,
            violations,
        }
    }

    /// Write the knot abscissae as a one-column CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.t {
            writeln!(w, "{}", crate::io::fmt_f64(*v))?;
        }
        Ok(())
    }

    /// Read a one-column CSV of knot abscissae; the order must be supplied.
    pub fn read_csv<R: BufRead>(r: R, d: usize) -> Result<Self> {
        let mut t = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|e| Error::Parse(format!("bad knot value {line:?}: {e}")))?;
            t.push(v);
        }
        Self::new(t, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_no_auxiliary_for_order_one() {
        let kv = KnotVector::place_uniform(0.0, 4.0, 2, 1).unwrap();
        let expect = [0.0, 4.0 / 3.0, 8.0 / 3.0, 4.0];
        assert_eq!(kv.knots().len(), expect.len());
        for (a, b) in kv.knots().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn uniform_step_one_extension() {
        let kv = KnotVector::place_uniform(0.0, 1.0, 0, 4).unwrap();
        let expect = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0];
        for (a, b) in kv.knots().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(kv.domain(), (0.0, 1.0));
    }

    #[test]
    fn uniform_extends_step_outward() {
        let kv = KnotVector::place_uniform(0.0, 4.0, 2, 4).unwrap();
        let h = 4.0 / 3.0;
        let expect = [
            -3.0 * h,
            -2.0 * h,
            -h,
            0.0,
            h,
            2.0 * h,
            4.0,
            4.0 + h,
            4.0 + 2.0 * h,
            8.0,
        ];
        for (a, b) in kv.knots().iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_has_constant_first_differences() {
        let kv = KnotVector::place_uniform(-2.5, 7.0, 13, 5).unwrap();
        let t = kv.knots();
        let h0 = t[1] - t[0];
        for w in t.windows(2) {
            assert!(((w[1] - w[0]) - h0).abs() < 1e-12 * h0.abs());
        }
    }

    #[test]
    fn uniform_rejects_bad_arguments() {
        assert!(KnotVector::place_uniform(1.0, 1.0, 3, 4).is_err());
        assert!(KnotVector::place_uniform(2.0, 1.0, 3, 4).is_err());
        assert!(KnotVector::place_uniform(f64::NAN, 1.0, 3, 4).is_err());
        assert!(KnotVector::place_uniform(0.0, 1.0, 3, 0).is_err());
    }

    #[test]
    fn quantile_clamped_matches_quartile_deck() {
        // Sample whose 1/3 and 2/3 quantiles sit at 1 and 3 under linear interpolation.
        let x = [0.0, 1.0, 3.0, 4.0];
        let kv = KnotVector::place_quantile_clamped(&x, 0.0, 4.0, 2, 4).unwrap();
        let expect = [0.0, 0.0, 0.0, 0.0, 1.0, 3.0, 4.0, 4.0, 4.0, 4.0];
        assert_eq!(kv.knots(), &expect);
        assert_eq!(kv.num_basis(), 6);
        assert_eq!(kv.num_interior(), 2);
    }

    #[test]
    fn quantile_clamped_no_interior() {
        let x = [0.0, 0.3, 0.8, 1.0];
        let kv = KnotVector::place_quantile_clamped(&x, 0.0, 1.0, 0, 2).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn quantile_clamped_equidistant_sample() {
        let x: Vec<f64> = (0..500).map(|i| i as f64 / 499.0).collect();
        let kv = KnotVector::place_quantile_clamped(&x, 0.0, 1.0, 3, 4).unwrap();
        // Brute-force empirical quantile of the explicit sample.
        let oracle = |level: f64| {
            let h = 499.0 * level;
            let i = h.floor() as usize;
            x[i] + (h - i as f64) * (x[i + 1] - x[i])
        };
        let t = kv.knots();
        for (j, expect) in [(4, oracle(0.25)), (5, oracle(0.5)), (6, oracle(0.75))] {
            assert_abs_diff_eq!(t[j], expect, epsilon = 1e-12);
            assert_abs_diff_eq!(t[j], (j - 3) as f64 * 0.25, epsilon = 2e-3);
        }
        // Equidistant x gives equidistant domain knots but a non-uniform full deck.
        let diffs: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(diffs.iter().any(|&h| h == 0.0));
    }

    #[test]
    fn quantile_ties_are_an_error() {
        let x = [0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0];
        let err = KnotVector::place_quantile_clamped(&x, 0.0, 1.0, 4, 3).unwrap_err();
        assert!(matches!(err, Error::TiedQuantiles { .. }), "got {err}");
    }

    #[test]
    fn diagnostics_on_reference_deck() {
        let kv = KnotVector::new(
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 3.0, 4.0, 4.0, 4.0, 4.0],
            4,
        )
        .unwrap();
        let diag = kv.diagnostics();
        assert!(diag.is_valid());
        assert_eq!(diag.num_knots, 10);
        assert_eq!(diag.num_basis, 6);
        assert_eq!(diag.num_interior, 2);
        assert_eq!(diag.domain, (0.0, 4.0));
    }

    #[test]
    fn diagnostics_flag_violations() {
        let decreasing = KnotVector {
            t: vec![0.0, 1.0, 0.5, 2.0],
            d: 1,
        };
        assert!(decreasing
            .diagnostics()
            .violations
            .iter()
            .any(|v| v.contains("nondecreasing")));

        let overfull = KnotVector {
            t: vec![0.0, 0.0, 0.0, 1.0, 2.0, 2.0],
            d: 2,
        };
        assert!(overfull
            .diagnostics()
            .violations
            .iter()
            .any(|v| v.contains("multiplicity exceeds order")));
    }

    #[test]
    fn bookkeeping_identities() {
        for (k, d) in [(0, 1), (0, 4), (3, 2), (10, 6)] {
            let kv = KnotVector::place_uniform(0.0, 1.0, k, d).unwrap();
            assert_eq!(kv.num_knots(), k + 2 * d);
            assert_eq!(kv.num_basis(), k + d);
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let kv = KnotVector::place_uniform(0.0, 4.0, 2, 4).unwrap();
        let mut buf = Vec::new();
        kv.write_csv(&mut buf).unwrap();
        let back = KnotVector::read_csv(buf.as_slice(), 4).unwrap();
        assert_eq!(back, kv);

        let json = serde_json::to_string(&kv).unwrap();
        assert!(json.contains("\"d\":4"));
        let back: KnotVector = serde_json::from_str(&json).unwrap();
        assert_eq!(back, kv);
    }
}
