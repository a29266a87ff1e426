//! Test-side oracles, written independently of the library code paths.
#![allow(dead_code)]

use qggm_core::{DenseMatrix, RngStream};

pub fn random_matrix(n: usize, p: usize, seed: u64) -> DenseMatrix {
    let mut rng = RngStream::new(seed, 0xABCD);
    DenseMatrix::new(n, p, (0..n * p).map(|_| rng.standard_normal()).collect()).unwrap()
}

pub fn uniform_matrix(n: usize, p: usize, lo: f64, hi: f64, seed: u64) -> DenseMatrix {
    let mut rng = RngStream::new(seed, 0x1234);
    DenseMatrix::new(n, p, (0..n * p).map(|_| lo + (hi - lo) * rng.uniform()).collect()).unwrap()
}

pub fn random_symmetric(p: usize, seed: u64) -> DenseMatrix {
    let a = random_matrix(p, p, seed);
    let mut s = a.clone();
    for i in 0..p {
        for j in 0..p {
            s[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    s
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let p = a.rows();
    let mut m: Vec<Vec<f64>> = a.to_rows();
    for _ in 0..100 {
        let off: f64 = (0..p).flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for k in 0..p {
            for l in k + 1..p {
                if m[k][l].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[l][l] - m[k][k]) / (2.0 * m[k][l]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..p {
                    let (mrk, mrl) = (m[r][k], m[r][l]);
                    m[r][k] = c * mrk - s * mrl;
                    m[r][l] = s * mrk + c * mrl;
                }
                for r in 0..p {
                    let (mkr, mlr) = (m[k][r], m[l][r]);
                    m[k][r] = c * mkr - s * mlr;
                    m[l][r] = s * mkr + c * mlr;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..p).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Max absolute column sum, straight from the definition.
pub fn l1_op(a: &DenseMatrix) -> f64 {
    let p = a.rows();
    (0..p).map(|j| (0..p).map(|i| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Sample covariance (divisor n) of the columns of `y`.
pub fn sample_cov(y: &DenseMatrix) -> DenseMatrix {
    let (n, p) = (y.rows(), y.cols());
    let mut c = DenseMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            c[(a, b)] = (0..n).map(|r| y[(r, a)] * y[(r, b)]).sum::<f64>() / n as f64;
        }
    }
    c
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &DenseMatrix) -> DenseMatrix {
    let p = a.rows();
    let mut m: Vec<Vec<f64>> = a.to_rows();
    let mut inv: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for c in 0..p {
        let piv = (c..p).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        inv.swap(c, piv);
        let d = m[c][c];
        for k in 0..p {
            m[c][k] /= d;
            inv[c][k] /= d;
        }
        for r in 0..p {
            if r != c {
                let f = m[r][c];
                for k in 0..p {
                    m[r][k] -= f * m[c][k];
                    inv[r][k] -= f * inv[c][k];
                }
            }
        }
    }
    DenseMatrix::from_rows(&inv).unwrap()
}
