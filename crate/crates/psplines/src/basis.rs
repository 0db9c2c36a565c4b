//! B-spline basis evaluation on arbitrary knots.
//!
//! Evaluation uses the in-place triangular scheme over the `d` active
//! functions; derivatives of a fitted spline come from the coefficient
//! recursion that lowers the basis order, never from differentiating
//! individual B-splines.

use crate::error::{Error, Result};
use crate::knots::KnotVector;
use serde::Serialize;
use std::io::Write;

/// A B-spline basis over a knot vector. `p = K - d` basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    kv: KnotVector,
}

/// One design-matrix row in compact form: the index of the first possibly
/// nonzero basis function plus the `d` values.
#[derive(Debug, Clone, Serialize)]
pub struct SparseRow {
    pub offset: usize,
    pub values: Vec<f64>,
}

/// Design matrix in compact row storage (at most `d` nonzeros per row).
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    num_basis: usize,
    rows: Vec<SparseRow>,
}

impl BasisSpec {
    pub fn new(kv: KnotVector) -> Self {
        Self { kv }
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.kv
    }

    pub fn order(&self) -> usize {
        self.kv.order()
    }

    pub fn num_basis(&self) -> usize {
        self.kv.num_basis()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.kv.domain()
    }

    /// Index `mu` of the knot span containing `x`: `t[mu] <= x < t[mu+1]`,
    /// with the final interval treated as closed at `b`.
    fn find_span(&self, x: f64) -> Result<usize> {
        let t = self.kv.knots();
        let d = self.kv.order();
        let (a, b) = self.kv.domain();
        if !(x >= a && x <= b) {
            return Err(Error::OutOfDomain { x, a, b });
        }
        let hi = t.len() - d - 1; // last candidate span index
        if x >= b {
            let mut mu = hi;
            while mu > d - 1 && t[mu] >= t[mu + 1] {
                mu -= 1;
            }
            return Ok(mu);
        }
        // Rightmost index in [d-1, hi] with t[mu] <= x.
        let mut lo = d - 1;
        let mut up = hi;
        while lo < up {
            let mid = (lo + up + 1) / 2;
            if t[mid] <= x {
                lo = mid;
            } else {
                up = mid - 1;
            }
        }
        Ok(lo)
    }

    /// The `d` possibly nonzero order-`d` B-spline values at `x`, plus the
    /// index of the first one.
    pub fn eval_row(&self, x: f64) -> Result<SparseRow> {
        let mu = self.find_span(x)?;
        let t = self.kv.knots();
        let d = self.kv.order();
        let deg = d - 1;
        let mut values = vec![0.0; d];
        values[0] = 1.0;
        let mut left = vec![0.0; d];
        let mut right = vec![0.0; d];
        for j in 1..=deg {
            left[j] = x - t[mu + 1 - j];
            right[j] = t[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                // Coalesced knots give 0/0 terms, which vanish by convention.
                let temp = if denom != 0.0 { values[r] / denom } else { 0.0 };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok(SparseRow {
            offset: mu + 1 - d,
            values,
        })
    }

    /// Evaluate all rows for a sample of abscissae.
    pub fn design_matrix(&self, x: &[f64]) -> Result<DesignMatrix> {
        let rows = x
            .iter()
            .map(|&xi| self.eval_row(xi))
            .collect::<Result<Vec<_>>>()?;
        Ok(DesignMatrix {
            num_basis: self.num_basis(),
            rows,
        })
    }

    /// B-spline coefficients of the `m`-th derivative, together with the
    /// order-`(d - m)` basis over the trimmed knots that carries them.
    ///
    /// Each step divides first differences of the coefficients by the average
    /// knot spacing over the lag window; evaluating the returned pair
    /// reproduces the derivative of the original spline.
    pub fn derivative_coeffs(&self, beta: &[f64], m: usize) -> Result<(BasisSpec, Vec<f64>)> {
        let d = self.kv.order();
        let p = self.num_basis();
        if m < 1 || m >= d {
            return Err(Error::InvalidArgument(format!(
                "derivative order m = {m} must satisfy 1 <= m <= d - 1 = {}",
                d - 1
            )));
        }
        if beta.len() != p {
            return Err(Error::InvalidArgument(format!(
                "expected {p} coefficients, got {}",
                beta.len()
            )));
        }
        let t = self.kv.knots();
        let mut coeffs = beta.to_vec();
        for i in 1..=m {
            let q = d - i;
            let mut next = vec![0.0; p - i];
            for r in 0..p - i {
                let gamma = t[r + d] - t[r + i];
                if gamma == 0.0 {
                    return Err(Error::SingularWeight { row: r });
                }
                next[r] = (coeffs[r + 1] - coeffs[r]) * q as f64 / gamma;
            }
            coeffs = next;
        }
        Ok((BasisSpec::new(self.kv.trim(m)?), coeffs))
    }

    /// Evaluate the spline (or its `m`-th derivative) at `x`.
    pub fn eval_spline(&self, beta: &[f64], x: f64, m: usize) -> Result<f64> {
        if m == 0 {
            if beta.len() != self.num_basis() {
                return Err(Error::InvalidArgument(format!(
                    "expected {} coefficients, got {}",
                    self.num_basis(),
                    beta.len()
                )));
            }
            let row = self.eval_row(x)?;
            return Ok(row
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| v * beta[row.offset + i])
                .sum());
        }
        let (lower, coeffs) = self.derivative_coeffs(beta, m)?;
        lower.eval_spline(&coeffs, x, 0)
    }
}

impl DesignMatrix {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut out = nalgebra::DMatrix::zeros(self.rows.len(), self.num_basis);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row.values.iter().enumerate() {
                out[(i, row.offset + j)] = *v;
            }
        }
        out
    }

    /// Normal-equation Gram matrix `BᵀB` as a symmetric band of width `d - 1`.
    pub fn gram(&self) -> crate::linalg::SymBandMatrix {
        let d = self.rows.first().map_or(1, |r| r.values.len());
        let mut out = crate::linalg::SymBandMatrix::zeros(self.num_basis, d - 1);
        for row in &self.rows {
            for (j, &vj) in row.values.iter().enumerate() {
                if vj == 0.0 {
                    continue;
                }
                for (l, &vl) in row.values.iter().enumerate().skip(j) {
                    out.add(row.offset + j, row.offset + l, vj * vl);
                }
            }
        }
        out
    }

    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows.len());
        let mut out = vec![0.0; self.num_basis];
        for (row, &yi) in self.rows.iter().zip(y) {
            for (j, v) in row.values.iter().enumerate() {
                out[row.offset + j] += v * yi;
            }
        }
        out
    }

    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.num_basis);
        self.rows
            .iter()
            .map(|row| {
                row.values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * beta[row.offset + j])
                    .sum()
            })
            .collect()
    }

    /// Dense CSV export, one sample per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.rows.len() {
            let dense_row: Vec<String> = (0..self.num_basis)
                .map(|j| {
                    let row = &self.rows[i];
                    let v = if j >= row.offset && j < row.offset + row.values.len() {
                        row.values[j - row.offset]
                    } else {
                        0.0
                    };
                    crate::io::fmt_f64(v)
                })
                .collect();
            writeln!(w, "{}", dense_row.join(","))?;
        }
        Ok(())
    }

    /// Compact `(offset, values)` JSON export.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "num_basis": self.num_basis,
            "rows": self.rows,
        })
    }
}

/// Greville abscissae: coefficients reproducing `f(x) = x` on a clamped basis.
pub fn greville_abscissae(kv: &KnotVector) -> Vec<f64> {
    let t = kv.knots();
    let d = kv.order();
    let p = kv.num_basis();
    (0..p)
        .map(|j| t[j + 1..j + d].iter().sum::<f64>() / (d - 1).max(1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn reference_deck() -> KnotVector {
        KnotVector::new(vec![0.0, 0.0, 0.0, 0.0, 1.0, 3.0, 4.0, 4.0, 4.0, 4.0], 4).unwrap()
    }

    /// Direct two-term recursion over order-1 indicators; independent of the
    /// triangular evaluation path.
    fn cox_de_boor(t: &[f64], j: usize, d: usize, x: f64, b_end: f64) -> f64 {
        if d == 1 {
            let closed_right = t[j + 1] >= b_end;
            let inside = x >= t[j] && (x < t[j + 1] || (closed_right && x <= t[j + 1]));
            return if inside { 1.0 } else { 0.0 };
        }
        let mut acc = 0.0;
        let g1 = t[j + d - 1] - t[j];
        if g1 != 0.0 {
            acc += (x - t[j]) * cox_de_boor(t, j, d - 1, x, b_end) / g1;
        }
        let g2 = t[j + d] - t[j + 1];
        if g2 != 0.0 {
            acc += (t[j + d] - x) * cox_de_boor(t, j + 1, d - 1, x, b_end) / g2;
        }
        acc
    }

    #[test]
    fn order_one_basis_is_indicator() {
        let kv = KnotVector::place_uniform(0.0, 4.0, 3, 1).unwrap();
        let bs = BasisSpec::new(kv);
        let row = bs.eval_row(1.5).unwrap();
        assert_eq!(row.values, vec![1.0]);
        assert_eq!(row.offset, 1);
    }

    #[test]
    fn uniform_cubic_values_at_interior_knot() {
        let kv = KnotVector::place_uniform(0.0, 8.0, 7, 4).unwrap(); // integer knots
        let bs = BasisSpec::new(kv);
        let row = bs.eval_row(3.0).unwrap();
        let nonzero: Vec<f64> = row.values.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nonzero.len(), 3);
        assert_abs_diff_eq!(nonzero[0], 1.0 / 6.0, epsilon = 1e-13);
        assert_abs_diff_eq!(nonzero[1], 4.0 / 6.0, epsilon = 1e-13);
        assert_abs_diff_eq!(nonzero[2], 1.0 / 6.0, epsilon = 1e-13);
    }

    #[test]
    fn clamped_boundary_values() {
        let bs = BasisSpec::new(reference_deck());
        let row = bs.eval_row(0.0).unwrap();
        assert_eq!(row.offset, 0);
        assert_abs_diff_eq!(row.values[0], 1.0, epsilon = 1e-15);
        for v in &row.values[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15);
        }
        // Last clamped B-spline reaches 1 at b.
        let beta = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert_abs_diff_eq!(bs.eval_spline(&beta, 4.0, 0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn matches_direct_recursion() {
        let bs = BasisSpec::new(reference_deck());
        let t = bs.knot_vector().knots().to_vec();
        for &x in &[0.0, 0.5, 1.0, 2.0, 2.7, 3.0, 3.99, 4.0] {
            let row = bs.eval_row(x).unwrap();
            for j in 0..bs.num_basis() {
                let expect = cox_de_boor(&t, j, 4, x, 4.0);
                let got = if j >= row.offset && j < row.offset + 4 {
                    row.values[j - row.offset]
                } else {
                    0.0
                };
                assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn partition_of_unity_on_clamped_grid() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let kv = KnotVector::place_quantile_clamped(&x, 0.0, 1.0, 7, 4).unwrap();
        let bs = BasisSpec::new(kv);
        for i in 0..1000 {
            let xi = i as f64 / 999.0;
            let row = bs.eval_row(xi).unwrap();
            let sum: f64 = row.values.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            for v in &row.values {
                assert!(*v >= 0.0 && *v <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_out_of_domain() {
        let bs = BasisSpec::new(reference_deck());
        assert!(matches!(
            bs.eval_row(-0.1),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(bs.eval_row(4.0001).is_err());
    }

    #[test]
    fn design_matrix_rows_sum_to_one() {
        let bs = BasisSpec::new(reference_deck());
        let x = [0.0, 0.4, 1.1, 2.0, 3.5, 4.0];
        let dm = bs.design_matrix(&x).unwrap();
        assert_eq!(dm.num_rows(), 6);
        let dense = dm.to_dense();
        for i in 0..6 {
            assert_abs_diff_eq!(dense.row(i).sum(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(dense[(0, 0)], 1.0, epsilon = 1e-15);
        // Offsets are monotone for sorted samples.
        let offs: Vec<usize> = dm.rows().iter().map(|r| r.offset).collect();
        assert!(offs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn constant_spline_has_zero_derivative_coeffs() {
        let bs = BasisSpec::new(reference_deck());
        let beta = vec![2.5; 6];
        for m in 1..=3 {
            let (_, coeffs) = bs.derivative_coeffs(&beta, m).unwrap();
            assert_eq!(coeffs.len(), 6 - m);
            for c in coeffs {
                assert_abs_diff_eq!(c, 0.0, epsilon = 1e-14);
            }
            assert_abs_diff_eq!(bs.eval_spline(&beta, 1.7, m).unwrap(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn linear_spline_has_unit_slope_coeffs() {
        let bs = BasisSpec::new(reference_deck());
        let beta = greville_abscissae(bs.knot_vector());
        // Sanity: the Greville coefficients reproduce f(x) = x.
        for &x in &[0.0, 0.3, 1.5, 3.2, 4.0] {
            assert_abs_diff_eq!(bs.eval_spline(&beta, x, 0).unwrap(), x, epsilon = 1e-12);
        }
        // One recursion step: the order-(d-1) coefficients of f' are all 1.
        let (_, coeffs) = bs.derivative_coeffs(&beta, 1).unwrap();
        for c in coeffs {
            assert_abs_diff_eq!(c, 1.0, epsilon = 1e-12);
        }
        // Higher derivatives of a linear spline vanish.
        let (_, coeffs) = bs.derivative_coeffs(&beta, 2).unwrap();
        for c in coeffs {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_rejects_order_overflow() {
        let bs = BasisSpec::new(reference_deck());
        let beta = vec![0.0; 6];
        assert!(bs.derivative_coeffs(&beta, 4).is_err());
        assert!(bs.derivative_coeffs(&beta, 0).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kv = KnotVector::place_uniform(0.0, 1.0, 6, 4).unwrap();
        let knots = kv.knots().to_vec();
        let bs = BasisSpec::new(kv);
        let h = 1e-5;
        for _ in 0..20 {
            let beta: Vec<f64> = (0..bs.num_basis()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for i in 1..100 {
                let x = 0.01 + 0.98 * i as f64 / 100.0;
                if knots.iter().any(|&t| (x - t).abs() < 1e-4) {
                    continue;
                }
                let fd = (bs.eval_spline(&beta, x + h, 0).unwrap()
                    - bs.eval_spline(&beta, x - h, 0).unwrap())
                    / (2.0 * h);
                let analytic = bs.eval_spline(&beta, x, 1).unwrap();
                assert_abs_diff_eq!(analytic, fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn derivative_order_telescopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bs = BasisSpec::new(reference_deck());
        let beta: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, direct) = bs.derivative_coeffs(&beta, 2).unwrap();
        let (mid, step1) = bs.derivative_coeffs(&beta, 1).unwrap();
        let (_, chained) = mid.derivative_coeffs(&step1, 1).unwrap();
        assert_eq!(direct.len(), chained.len());
        for (a, b) in direct.iter().zip(&chained) {
            assert_eq!(a, b); // exact identity of the factorization
        }
    }
}
