//! Band matrix storage and factorizations.
//!
//! Everything downstream (difference operators, Gram matrices, penalty
//! matrices, normal equations) is banded, so a single band layout is used
//! throughout and matrices are only densified on export or in test oracles.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Rectangular band matrix: row `i` may be nonzero in columns
/// `i - sub ..= i + sup`, stored row-major with `sub + sup + 1` slots per row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    rows: usize,
    cols: usize,
    sub: usize,
    sup: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(rows: usize, cols: usize, sub: usize, sup: usize) -> Self {
        Self {
            rows,
            cols,
            sub,
            sup,
            data: vec![0.0; rows * (sub + sup + 1)],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sub_diagonals(&self) -> usize {
        self.sub
    }

    pub fn super_diagonals(&self) -> usize {
        self.sup
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.sub >= i && j <= i + self.sup && j < self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * (self.sub + self.sup + 1) + (j + self.sub - i)]
        } else {
            0.0
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        self.data[i * (self.sub + self.sup + 1) + (j + self.sub - i)] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        self.data[i * (self.sub + self.sup + 1) + (j + self.sub - i)] += v;
    }

    /// Column range of the band in row `i`, clipped to the matrix.
    #[inline]
    pub fn band_cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.sub)..self.cols.min(i + self.sup + 1)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in self.band_cols(i) {
                out[(i, j)] = self.get(i, j);
            }
        }
        out
    }

    pub fn transpose(&self) -> BandMatrix {
        let mut out = BandMatrix::zeros(self.cols, self.rows, self.sup, self.sub);
        for i in 0..self.rows {
            for j in self.band_cols(i) {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Band-aware product; the result band is the sum of the operand bands.
    pub fn mul(&self, other: &BandMatrix) -> BandMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in band product");
        let mut out = BandMatrix::zeros(
            self.rows,
            other.cols,
            self.sub + other.sub,
            self.sup + other.sup,
        );
        for i in 0..self.rows {
            for k in self.band_cols(i) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in other.band_cols(k) {
                    if out.in_band(i, j) {
                        out.add(i, j, a * other.get(k, j));
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in self.band_cols(i) {
                acc += self.get(i, j) * x[j];
            }
            y[i] = acc;
        }
        y
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in self.band_cols(i) {
                y[j] += self.get(i, j) * x[i];
            }
        }
        y
    }

    /// Gram product `AᵀA` as a symmetric band matrix of bandwidth `sub + sup`.
    pub fn gram(&self) -> SymBandMatrix {
        let bw = self.sub + self.sup;
        let mut out = SymBandMatrix::zeros(self.cols, bw);
        for i in 0..self.rows {
            for u in self.band_cols(i) {
                let a = self.get(i, u);
                if a == 0.0 {
                    continue;
                }
                for v in self.band_cols(i) {
                    if v >= u {
                        out.add(u, v, a * self.get(i, v));
                    }
                }
            }
        }
        out
    }
}

/// Symmetric positive-(semi)definite band matrix of dimension `n` with
/// bandwidth `bw`; only the upper triangle `(i, i + j)`, `j <= bw` is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi - lo > self.bw || hi >= self.n {
            0.0
        } else {
            self.data[lo * (self.bw + 1) + (hi - lo)]
        }
    }

    /// Add to entry `(i, j)` of the upper triangle (`i <= j`, within band).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i <= j && j - i <= self.bw && j < self.n);
        self.data[i * (self.bw + 1) + (j - i)] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i <= j && j - i <= self.bw && j < self.n);
        self.data[i * (self.bw + 1) + (j - i)] = v;
    }

    /// `self + scale * other`, widening the band as needed.
    pub fn add_scaled(&self, other: &SymBandMatrix, scale: f64) -> SymBandMatrix {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBandMatrix::zeros(self.n, bw);
        for i in 0..self.n {
            for j in i..self.n.min(i + bw + 1) {
                out.set(i, j, self.get(i, j) + scale * other.get(i, j));
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i..self.n.min(i + self.bw + 1) {
                out[(i, j)] = self.get(i, j);
                out[(j, i)] = self.get(i, j);
            }
        }
        out
    }

    /// Expand to the general band layout (sub = sup = bandwidth).
    pub fn to_band(&self) -> BandMatrix {
        let mut out = BandMatrix::zeros(self.n, self.n, self.bw, self.bw);
        for i in 0..self.n {
            for j in out.band_cols(i) {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    /// Upper Cholesky factor `U` with `A = UᵀU`, preserving the bandwidth.
    pub fn cholesky(&self) -> Result<BandMatrix> {
        self.cholesky_with_rel_tol(1e-13)
    }

    /// Cholesky with a caller-chosen pivot tolerance relative to the largest
    /// diagonal entry. A tolerance of zero fails only on nonpositive pivots,
    /// which is the right mode for positive definite but extremely scaled
    /// systems (e.g. huge smoothing parameters).
    pub fn cholesky_with_rel_tol(&self, rel_tol: f64) -> Result<BandMatrix> {
        let n = self.n;
        let bw = self.bw;
        let mut u = BandMatrix::zeros(n, n, 0, bw);
        let scale = (0..n)
            .map(|i| self.get(i, i).abs())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            for i in lo..=j {
                let mut sum = self.get(i, j);
                for k in lo..i {
                    sum -= u.get(k, i) * u.get(k, j);
                }
                if i < j {
                    u.set(i, j, sum / u.get(i, i));
                } else {
                    if !(sum > rel_tol * scale) {
                        return Err(Error::NotPositiveDefinite {
                            index: j,
                            pivot: sum,
                        });
                    }
                    u.set(j, j, sum.sqrt());
                }
            }
        }
        Ok(u)
    }
}

/// Residual `b - A x` accumulated with compensated (fma-based) arithmetic so
/// the cancellation in ill-conditioned systems does not swamp the result.
fn compensated_residual(a: &SymBandMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.dim();
    let bw = a.bandwidth();
    let mut r = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        let mut comp = 0.0;
        for j in i.saturating_sub(bw)..n.min(i + bw + 1) {
            let m = a.get(i, j);
            let prod = m * x[j];
            let prod_err = m.mul_add(x[j], -prod);
            for term in [-prod, -prod_err] {
                let t = sum + term;
                comp += if sum.abs() >= term.abs() {
                    (sum - t) + term
                } else {
                    (term - t) + sum
                };
                sum = t;
            }
        }
        r[i] = sum + comp;
    }
    r
}

/// Solve `A x = b` via the Cholesky factor `U` of `A`, then polish with
/// iterative refinement using compensated residuals. Recovers most of the
/// accuracy lost to cancellation when `A` is badly scaled (large smoothing
/// parameters).
pub fn refined_cholesky_solve(a: &SymBandMatrix, u: &BandMatrix, b: &[f64]) -> Vec<f64> {
    let mut x = cholesky_solve(u, b);
    let mut prev_norm = f64::INFINITY;
    for _ in 0..4 {
        let r = compensated_residual(a, &x, b);
        let dx = cholesky_solve(u, &r);
        let norm = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let x_scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // A correction comparable to the solution itself means the system is
        // too ill-conditioned for refinement to help; keep the direct solve.
        if !norm.is_finite() || norm >= prev_norm || norm > 0.1 * x_scale {
            break;
        }
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm <= 1e-16 * scale {
            break;
        }
        prev_norm = norm;
    }
    x
}

/// Solve `UᵀU x = b` for an upper band Cholesky factor `U`.
pub fn cholesky_solve(u: &BandMatrix, b: &[f64]) -> Vec<f64> {
    let n = u.rows();
    let bw = u.super_diagonals();
    assert_eq!(b.len(), n);
    let mut z = b.to_vec();
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        let mut sum = z[i];
        for k in lo..i {
            sum -= u.get(k, i) * z[k];
        }
        z[i] = sum / u.get(i, i);
    }
    for i in (0..n).rev() {
        let hi = n.min(i + bw + 1);
        let mut sum = z[i];
        for j in i + 1..hi {
            sum -= u.get(i, j) * z[j];
        }
        z[i] = sum / u.get(i, i);
    }
    z
}

/// Fixed Gauss-Legendre rule on `[-1, 1]`, nodes computed by Newton iteration
/// on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd_band(n: usize, bw: usize, rng: &mut impl Rng) -> SymBandMatrix {
        // AᵀA + n·I of a random band matrix is positive definite.
        let mut a = BandMatrix::zeros(n, n, 0, bw);
        for i in 0..n {
            for j in a.band_cols(i) {
                a.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        let mut s = a.gram();
        for i in 0..n {
            s.add(i, i, n as f64);
        }
        s
    }

    #[test]
    fn band_product_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = BandMatrix::zeros(7, 9, 1, 2);
        let mut b = BandMatrix::zeros(9, 6, 0, 3);
        for i in 0..7 {
            for j in a.band_cols(i) {
                a.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        for i in 0..9 {
            for j in b.band_cols(i) {
                b.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        let c = a.mul(&b);
        let dense = a.to_dense() * b.to_dense();
        assert_abs_diff_eq!(c.to_dense(), dense, epsilon = 1e-13);
    }

    #[test]
    fn gram_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = BandMatrix::zeros(8, 10, 0, 3);
        for i in 0..8 {
            for j in a.band_cols(i) {
                a.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        let g = a.gram();
        let dense = a.to_dense().transpose() * a.to_dense();
        assert_abs_diff_eq!(g.to_dense(), dense, epsilon = 1e-13);
    }

    #[test]
    fn cholesky_solves_banded_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, bw) in &[(5, 1), (12, 3), (30, 5)] {
            let s = random_spd_band(n, bw, &mut rng);
            let u = s.cholesky().unwrap();
            assert_eq!(u.super_diagonals(), bw);
            let utu = u.to_dense().transpose() * u.to_dense();
            assert_abs_diff_eq!(utu, s.to_dense(), epsilon = 1e-10);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = cholesky_solve(&u, &b);
            let r = s.to_dense() * nalgebra::DVector::from_vec(x);
            for i in 0..n {
                assert_abs_diff_eq!(r[i], b[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn cholesky_rejects_singular() {
        let mut s = SymBandMatrix::zeros(3, 1);
        s.set(0, 0, 1.0);
        s.set(0, 1, 1.0);
        s.set(1, 1, 1.0); // second pivot exactly zero
        s.set(2, 2, 1.0);
        assert!(matches!(
            s.cholesky(),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            // Exact for degree 2n - 1.
            for deg in 0..2 * n {
                let quad: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 0 {
                    2.0 / (deg as f64 + 1.0)
                } else {
                    0.0
                };
                assert_abs_diff_eq!(quad, exact, epsilon = 1e-13);
            }
        }
    }
}
