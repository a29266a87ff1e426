//! Dense containers, the Gram matrix, and the column-wise Gaussian
//! pseudo-likelihood.
//!
//! For data `Y` (n × p) and a precision state `Ω`, the pseudo-likelihood is a
//! product of per-column conditional Gaussian likelihoods:
//!
//! ```text
//! log q(Y | Ω) = Σ_j (n/2) log(ω_jj / 2π) − (ω_jj / 2) ‖Y_j + Σ_{k≠j} (ω_kj / ω_jj) Y_k‖²
//! ```
//!
//! Only column `j` of `Ω` enters the `j`-th term, so the columns can be
//! scored (and sampled) independently.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Build from row-major data. Rejects wrong lengths and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} entries ({rows}x{cols})", rows * cols),
                found: format!("{} entries", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = Self::zeros(p, p);
        for i in 0..p {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Build from a slice of equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch {
                expected: format!("{ncols} columns"),
                found: format!("{} columns in row {bad}", rows[bad].len()),
            });
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), ncols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// Exact symmetry check (no tolerance).
    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * k).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows on the right operand", self.cols),
                found: format!("{}", other.rows),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                found: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    pub(crate) fn check_square(&self, what: &str) -> Result<()> {
        if !self.is_square() {
            return Err(Error::invalid(format!(
                "{what} must be square, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `S = YᵀY`, symmetric to exact equality.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    s: DenseMatrix,
}

impl GramMatrix {
    pub fn p(&self) -> usize {
        self.s.rows()
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.s[(k, j)]
    }

    /// Row `k` of S (equal to column `k`).
    pub fn row(&self, k: usize) -> &[f64] {
        self.s.row(k)
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.s
    }
}

/// Sums of products of the data columns. Only the upper triangle is
/// accumulated; the lower triangle is a mirror.
pub fn gram(y: &DenseMatrix) -> Result<GramMatrix> {
    if y.rows() == 0 || y.cols() == 0 {
        return Err(Error::invalid("data matrix must have at least one row and one column"));
    }
    if let Some(pos) = y.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite data entry at row {}, column {}",
            pos / y.cols(),
            pos % y.cols()
        )));
    }
    let p = y.cols();
    let mut s = DenseMatrix::zeros(p, p);
    for r in 0..y.rows() {
        let row = y.row(r);
        for k in 0..p {
            let yk = row[k];
            if yk == 0.0 {
                continue;
            }
            let dst = &mut s.as_mut_slice()[k * p..(k + 1) * p];
            for j in k..p {
                dst[j] += yk * row[j];
            }
        }
    }
    for k in 0..p {
        for j in 0..k {
            s[(k, j)] = s[(j, k)];
        }
    }
    Ok(GramMatrix { s })
}

/// A (generally asymmetric) precision matrix with a separately stored,
/// strictly positive diagonal.
///
/// `offdiag[(j, i)]` is ω_ji, the `j`-th entry of column `i`; its diagonal is
/// kept at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionDraw {
    diag: Vec<f64>,
    offdiag: DenseMatrix,
}

impl PrecisionDraw {
    pub fn new(diag: Vec<f64>, offdiag: DenseMatrix) -> Result<Self> {
        let p = diag.len();
        if offdiag.rows() != p || offdiag.cols() != p {
            return Err(Error::DimensionMismatch {
                expected: format!("{p}x{p} off-diagonal block"),
                found: format!("{}x{}", offdiag.rows(), offdiag.cols()),
            });
        }
        validate_diag(&diag)?;
        for i in 0..p {
            if offdiag[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("off-diagonal block has nonzero ({i}, {i})")));
            }
        }
        if offdiag.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite off-diagonal entry"));
        }
        Ok(Self { diag, offdiag })
    }

    /// Diagonal given, off-diagonal zero.
    pub fn from_diag(diag: Vec<f64>) -> Result<Self> {
        let p = diag.len();
        Self::new(diag, DenseMatrix::zeros(p, p))
    }

    /// Split a full square matrix into diagonal and off-diagonal parts.
    pub fn from_full(m: &DenseMatrix) -> Result<Self> {
        m.check_square("precision matrix")?;
        let diag = m.diag();
        let mut off = m.clone();
        for i in 0..m.rows() {
            off[(i, i)] = 0.0;
        }
        Self::new(diag, off)
    }

    pub fn p(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &DenseMatrix {
        &self.offdiag
    }

    /// ω_ji for `j ≠ i`, ω_ii on the diagonal.
    pub fn get(&self, j: usize, i: usize) -> f64 {
        if j == i {
            self.diag[i]
        } else {
            self.offdiag[(j, i)]
        }
    }

    /// Column `i` of the off-diagonal block (entry `i` is zero).
    pub fn offdiag_column(&self, i: usize) -> Vec<f64> {
        self.offdiag.column(i)
    }

    /// Overwrite column `i` of the off-diagonal block. Entry `i` of `col` is ignored.
    pub fn set_offdiag_column(&mut self, i: usize, col: &[f64]) {
        for (j, &v) in col.iter().enumerate() {
            if j != i {
                self.offdiag[(j, i)] = v;
            }
        }
    }

    pub(crate) fn offdiag_mut(&mut self) -> &mut DenseMatrix {
        &mut self.offdiag
    }

    /// Full matrix with the diagonal filled in.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = self.offdiag.clone();
        for (i, &d) in self.diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }
}

pub(crate) fn validate_diag(diag: &[f64]) -> Result<()> {
    if let Some(i) = diag.iter().position(|&d| !(d.is_finite() && d > 0.0)) {
        return Err(Error::invalid(format!(
            "diagonal entry {i} must be finite and positive, got {}",
            diag[i]
        )));
    }
    Ok(())
}

/// The `j`-th column score of the pseudo-likelihood.
pub fn log_pseudo_likelihood_column(y: &DenseMatrix, omega: &PrecisionDraw, j: usize) -> Result<f64> {
    if y.cols() != omega.p() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} data columns", omega.p()),
            found: format!("{}", y.cols()),
        });
    }
    if j >= omega.p() {
        return Err(Error::invalid(format!("column {j} out of range for p = {}", omega.p())));
    }
    let w_jj = omega.diag()[j];
    validate_diag(&[w_jj])?;
    let n = y.rows() as f64;
    let coef: Vec<f64> =
        (0..omega.p()).map(|k| if k == j { 1.0 } else { omega.get(k, j) / w_jj }).collect();
    // residual_r = Y_rj + Σ_{k≠j} (ω_kj / ω_jj) Y_rk
    let rss: f64 = (0..y.rows())
        .map(|r| {
            let e = dot(y.row(r), &coef);
            e * e
        })
        .sum();
    Ok(0.5 * n * (w_jj / (2.0 * PI)).ln() - 0.5 * w_jj * rss)
}

/// Sum of the `p` column scores.
pub fn log_pseudo_likelihood(y: &DenseMatrix, omega: &PrecisionDraw) -> Result<f64> {
    (0..omega.p()).map(|j| log_pseudo_likelihood_column(y, omega, j)).sum()
}
