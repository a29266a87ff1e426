//! Small dense linear-algebra kernels: Cholesky, triangular solves and
//! eigenvalue estimates for symmetric matrices.

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};

/// Lower Cholesky factor `L` with `A = L Lᵀ`, or `None` if `A` is not
/// numerically positive definite.
pub fn cholesky(a: &DenseMatrix) -> Option<DenseMatrix> {
    let p = a.rows();
    if !a.is_square() {
        return None;
    }
    let mut l = DenseMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                let d = a[(i, i)] - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[(i, i)] = d.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solve `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let p = l.rows();
    let mut x = b.to_vec();
    for i in 0..p {
        let s = dot(&l.row(i)[..i], &x[..i]);
        x[i] = (x[i] - s) / l[(i, i)];
    }
    x
}

/// Solve `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_upper_transposed(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let p = l.rows();
    let mut x = b.to_vec();
    for i in (0..p).rev() {
        let mut s = 0.0;
        for k in i + 1..p {
            s += l[(k, i)] * x[k];
        }
        x[i] = (x[i] - s) / l[(i, i)];
    }
    x
}

/// Solve `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    solve_upper_transposed(l, &solve_lower(l, b))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn inverse_spd(a: &DenseMatrix) -> Result<DenseMatrix> {
    let l = cholesky(a).ok_or_else(|| Error::numerical("matrix is not positive definite"))?;
    let p = a.rows();
    let mut inv = DenseMatrix::zeros(p, p);
    let mut e = vec![0.0; p];
    for c in 0..p {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[c] = 1.0;
        let col = cholesky_solve(&l, &e);
        for r in 0..p {
            inv[(r, c)] = col[r];
        }
    }
    // Mirror to remove rounding asymmetry.
    for r in 0..p {
        for c in 0..r {
            let m = 0.5 * (inv[(r, c)] + inv[(c, r)]);
            inv[(r, c)] = m;
            inv[(c, r)] = m;
        }
    }
    Ok(inv)
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

fn start_vector(p: usize) -> Vec<f64> {
    // Deterministic, not orthogonal to any coordinate axis.
    let mut x: Vec<f64> = (0..p).map(|i| 1.0 + 0.1 * ((i * 7919 % 13) as f64)).collect();
    normalize(&mut x);
    x
}

/// Smallest eigenvalue of a symmetric positive-definite matrix by inverse
/// power iteration on its Cholesky factor.
pub fn min_eigenvalue_spd(a: &DenseMatrix, l: &DenseMatrix) -> f64 {
    let p = a.rows();
    let mut x = start_vector(p);
    let mut lambda = f64::INFINITY;
    for _ in 0..5000 {
        let mut y = cholesky_solve(l, &x);
        normalize(&mut y);
        let rq = dot(&y, &a.mat_vec(&y));
        x = y;
        if (rq - lambda).abs() <= 1e-13 * rq.abs().max(1e-300) {
            return rq;
        }
        lambda = rq;
    }
    lambda
}

/// Smallest eigenvalue of a symmetric matrix via power iteration on
/// `c·I − A`, with `c` a Gershgorin upper bound.
pub fn min_eigenvalue_symmetric(a: &DenseMatrix) -> f64 {
    let p = a.rows();
    let c = (0..p)
        .map(|i| a[(i, i)] + (0..p).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut x = start_vector(p);
    let mut prev = 0.0;
    for _ in 0..20_000 {
        let ax = a.mat_vec(&x);
        let mut y: Vec<f64> = x.iter().zip(&ax).map(|(xi, ai)| c * xi - ai).collect();
        let n = normalize(&mut y);
        x = y;
        if (n - prev).abs() <= 1e-13 * n.abs().max(1.0) {
            break;
        }
        prev = n;
    }
    dot(&x, &a.mat_vec(&x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_roundtrip_and_solve() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 2.0, 0.4], vec![2.0, 3.0, 0.5], vec![0.4, 0.5, 2.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let llt = l.matmul(&l.transpose()).unwrap();
        for (x, y) in llt.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let x = cholesky_solve(&l, &[1.0, 2.0, 3.0]);
        let ax = a.mat_vec(&x);
        for (u, v) in ax.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-12);
        }
        let inv = inverse_spd(&a).unwrap();
        let id = a.matmul(&inv).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((id[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn min_eigenvalues() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.999], vec![0.999, 1.0]]).unwrap();
        assert!((min_eigenvalue_symmetric(&a) - 0.001).abs() < 1e-9);
        let l = cholesky(&a).unwrap();
        assert!((min_eigenvalue_spd(&a, &l) - 0.001).abs() < 1e-9);
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!((min_eigenvalue_symmetric(&b) + 1.0).abs() < 1e-9);
    }
}
