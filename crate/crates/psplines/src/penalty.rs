//! Difference and derivative penalty matrices.
//!
//! The standard difference matrix `D` stacks signed binomial rows; its general
//! counterpart reweights each first-difference step by the average knot
//! spacing over the corresponding lag window, so that applying it to spline
//! coefficients yields the B-spline coefficients of the derivative. The
//! derivative penalty is assembled by sandwiching the lower-order Gram matrix
//! between general difference matrices, which also yields a banded
//! full-row-rank root `K` with `KᵀK = S`.

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::knots::KnotVector;
use crate::linalg::{gauss_legendre, BandMatrix, SymBandMatrix};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffKind {
    Standard,
    General,
}

/// Banded `(p - m) x p` difference operator with `m` super-diagonals.
#[derive(Debug, Clone)]
pub struct DiffMatrix {
    kind: DiffKind,
    order: usize,
    band: BandMatrix,
}

impl DiffMatrix {
    pub fn kind(&self) -> DiffKind {
        self.kind
    }

    /// Penalty order `m`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn band(&self) -> &BandMatrix {
        &self.band
    }

    pub fn num_coeffs(&self) -> usize {
        self.band.cols()
    }

    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        self.band.mul_vec(beta)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.band.to_dense()
    }
}

/// Shared iteration: each step maps the current `(p - i + 1)`-row operator to
/// `p - i` rows by weighted first differences of adjacent rows.
fn build_diff(p: usize, m: usize, mut weight: impl FnMut(usize, usize) -> Result<f64>) -> Result<DiffMatrix> {
    let mut cur = BandMatrix::zeros(p, p, 0, 0);
    for r in 0..p {
        cur.set(r, r, 1.0);
    }
    for i in 1..=m {
        let rows = p - i;
        let mut next = BandMatrix::zeros(rows, p, 0, i);
        for r in 0..rows {
            let w = weight(i, r)?;
            for c in 0..=i {
                let v = cur.get(r + 1, r + c) - cur.get(r, r + c);
                if v != 0.0 {
                    next.set(r, r + c, w * v);
                }
            }
        }
        cur = next;
    }
    Ok(DiffMatrix {
        kind: DiffKind::Standard,
        order: m,
        band: cur,
    })
}

/// Order-`m` standard difference matrix: rows of signed binomial coefficients.
pub fn standard_diff(p: usize, m: usize) -> Result<DiffMatrix> {
    if m < 1 || m >= p {
        return Err(Error::InvalidArgument(format!(
            "difference order m = {m} must satisfy 1 <= m < p = {p}"
        )));
    }
    build_diff(p, m, |_, _| Ok(1.0))
}

/// Order-`m` general difference matrix on an arbitrary knot sequence.
///
/// Step `i` divides by the lag-`(d - i)` knot difference scaled by `d - i`;
/// coincident knots across a lag window make the weight singular.
pub fn general_diff(kv: &KnotVector, m: usize) -> Result<DiffMatrix> {
    let d = kv.order();
    let p = kv.num_basis();
    if m < 1 || m >= d {
        return Err(Error::InvalidArgument(format!(
            "general difference order m = {m} must satisfy 1 <= m <= d - 1 = {}",
            d - 1
        )));
    }
    let t = kv.knots();
    let mut diff = build_diff(p, m, |i, r| {
        let gamma = t[r + d] - t[r + i];
        if gamma <= 0.0 {
            return Err(Error::SingularWeight { row: r });
        }
        Ok((d - i) as f64 / gamma)
    })?;
    diff.kind = DiffKind::General;
    Ok(diff)
}

/// Gram matrix of the order-`(d - m)` B-splines spanning the domain, with its
/// banded upper Cholesky factor.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    matrix: SymBandMatrix,
    cholesky: BandMatrix,
}

impl GramMatrix {
    pub fn matrix(&self) -> &SymBandMatrix {
        &self.matrix
    }

    /// Upper factor `U` with `UᵀU` equal to the Gram matrix.
    pub fn cholesky(&self) -> &BandMatrix {
        &self.cholesky
    }
}

/// Integrals of products of order-`(d - m)` B-splines over the domain,
/// computed per inter-knot interval by Gauss-Legendre quadrature with `d - m`
/// nodes (exact: the integrand is piecewise polynomial of degree
/// `2(d - m - 1)`).
pub fn gram(kv: &KnotVector, m: usize) -> Result<GramMatrix> {
    let d = kv.order();
    if m < 1 || m >= d {
        return Err(Error::InvalidArgument(format!(
            "gram order m = {m} must satisfy 1 <= m <= d - 1 = {}",
            d - 1
        )));
    }
    let q = d - m;
    let trimmed = kv.trim(m)?;
    let bs = BasisSpec::new(trimmed.clone());
    let pbar = trimmed.num_basis();
    let mut s = SymBandMatrix::zeros(pbar, q);
    let (nodes, weights) = gauss_legendre(q);
    let t = trimmed.knots();
    for span in (q - 1)..(t.len() - q) {
        let (lo, hi) = (t[span], t[span + 1]);
        if hi <= lo {
            continue;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (&xi, &wi) in nodes.iter().zip(&weights) {
            let row = bs.eval_row(mid + half * xi)?;
            let w = wi * half;
            for (j, &vj) in row.values.iter().enumerate() {
                if vj == 0.0 {
                    continue;
                }
                for (l, &vl) in row.values.iter().enumerate().skip(j) {
                    s.add(row.offset + j, row.offset + l, w * vj * vl);
                }
            }
        }
    }
    let cholesky = s.cholesky()?;
    Ok(GramMatrix {
        matrix: s,
        cholesky,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyFlavor {
    /// `S = DᵀD` for a (standard or general) difference matrix `D`.
    Difference,
    /// `S = DᵀS̄D`, the exact integral of the squared `m`-th derivative.
    Derivative,
}

/// Symmetric positive-semidefinite `p x p` penalty matrix with its banded
/// full-row-rank root (`rootᵀ·root = S`, null space of dimension `m`).
#[derive(Debug, Clone)]
pub struct PenaltyMatrix {
    flavor: PenaltyFlavor,
    order: usize,
    matrix: SymBandMatrix,
    root: BandMatrix,
}

impl PenaltyMatrix {
    pub fn flavor(&self) -> PenaltyFlavor {
        self.flavor
    }

    /// Penalty order `m` (dimension of the null space).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &SymBandMatrix {
        &self.matrix
    }

    pub fn root(&self) -> &BandMatrix {
        &self.root
    }

    pub fn num_coeffs(&self) -> usize {
        self.matrix.dim()
    }

    /// `βᵀSβ`.
    pub fn quadratic_form(&self, beta: &[f64]) -> f64 {
        let r = self.root.mul_vec(beta);
        r.iter().map(|v| v * v).sum()
    }
}

/// Difference-squared penalty `S = DᵀD` with root `D`.
pub fn difference_penalty(diff: &DiffMatrix) -> PenaltyMatrix {
    PenaltyMatrix {
        flavor: PenaltyFlavor::Difference,
        order: diff.order(),
        matrix: diff.band().gram(),
        root: diff.band().clone(),
    }
}

/// Derivative penalty assembled by the sandwich `S = DᵀS̄D`, with sparse root
/// `K = U·D` where `U` is the banded Cholesky factor of `S̄`.
pub fn derivative_penalty(kv: &KnotVector, m: usize) -> Result<PenaltyMatrix> {
    let diff = general_diff(kv, m)?;
    let g = gram(kv, m)?;
    let root = g.cholesky().mul(diff.band());
    let sandwich = diff
        .band()
        .transpose()
        .mul(&g.matrix().to_band().mul(diff.band()));
    let p = kv.num_basis();
    let d = kv.order();
    let mut s = SymBandMatrix::zeros(p, d);
    for i in 0..p {
        for j in i..p.min(i + d + 1) {
            s.set(i, j, 0.5 * (sandwich.get(i, j) + sandwich.get(j, i)));
        }
    }
    Ok(PenaltyMatrix {
        flavor: PenaltyFlavor::Derivative,
        order: m,
        matrix: s,
        root,
    })
}

/// A `p x m` matrix whose columns span the null space of the penalty root,
/// obtained from the eigenvectors of `S` with the smallest eigenvalues.
pub fn null_space_basis(pen: &PenaltyMatrix) -> DMatrix<f64> {
    let p = pen.num_coeffs();
    let m = pen.order();
    let eig = nalgebra::SymmetricEigen::new(pen.matrix.to_dense());
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .abs()
            .partial_cmp(&eig.eigenvalues[b].abs())
            .unwrap()
    });
    let mut h = DMatrix::zeros(p, m);
    for (c, &i) in idx.iter().take(m).enumerate() {
        h.set_column(c, &eig.eigenvectors.column(i));
    }
    h
}
