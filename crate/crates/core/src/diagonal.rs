//! Plug-in estimates of the diagonal ω_ii from Lasso residual variances.
//!
//! Column `i` is regressed on the remaining columns without intercept or
//! standardization. The penalty is chosen by K-fold cross-validation over a
//! log-spaced grid, and ω̂_ii is the reciprocal of the degrees-of-freedom
//! adjusted residual mean square.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::matrix::{dot, gram, DenseMatrix};
use crate::rng::RngStream;

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_N_LAMBDA: usize = 50;
pub const DEFAULT_LAMBDA_RATIO: f64 = 1e-3;
pub const CD_TOL: f64 = 1e-7;
pub const KKT_TOL: f64 = 1e-5;
/// Solver stopping threshold on the KKT residual, a decade inside `KKT_TOL`.
pub const CD_KKT_TOL: f64 = 1e-6;
pub const MAX_SWEEPS: usize = 10_000;
/// Active-set sweeps between full sweeps.
const ACTIVE_SWEEPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub s_hat: usize,
    /// ‖y − Xβ‖² / (n − s_hat); zero when n ≤ s_hat.
    pub mse_df: f64,
}

/// Soft-thresholding operator S(z, λ) = sign(z)·max(|z| − λ, 0).
pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Coordinate descent on the quadratic form `½βᵀGβ − cᵀβ + λ‖β‖₁`, where
/// `G = XᵀX/n` and `c = Xᵀy/n`. `beta` is the warm start and is overwritten.
///
/// Full sweeps alternate with sweeps over the current nonzero set. The
/// stopping rule is the KKT residual read off the maintained gradient, which
/// ill-conditioned designs reach long before the coefficients settle.
fn cd_gram(g: &[f64], c: &[f64], m: usize, lambda: f64, beta: &mut [f64]) -> Result<()> {
    // grad[j] = c_j − (Gβ)_j
    let mut grad: Vec<f64> = (0..m).map(|j| c[j] - dot(&g[j * m..(j + 1) * m], beta)).collect();
    let all: Vec<usize> = (0..m).collect();
    let mut active = Vec::with_capacity(m);
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let change = coordinate_sweep(g, m, lambda, beta, &mut grad, &all);
        if change < CD_TOL || kkt_from_gradient(&grad, beta, lambda, &all) < CD_KKT_TOL {
            return Ok(());
        }
        active.clear();
        active.extend((0..m).filter(|&j| beta[j] != 0.0));
        if active_set_solve(g, c, m, lambda, beta, &mut grad, &active) {
            return Ok(());
        }
        for _ in 0..ACTIVE_SWEEPS {
            sweeps += 1;
            let change = coordinate_sweep(g, m, lambda, beta, &mut grad, &active);
            if change < CD_TOL || kkt_from_gradient(&grad, beta, lambda, &active) < CD_KKT_TOL {
                break;
            }
        }
    }
    Err(Error::NonConvergence(format!(
        "lasso coordinate descent did not converge in {MAX_SWEEPS} sweeps at lambda = {lambda}"
    )))
}

/// Solve the stationarity equations `G_AA β_A = c_A − λ·sign(β_A)` on the
/// active set with its current signs. The candidate is accepted, and `beta`
/// and `grad` replaced, only when it keeps every sign and satisfies the KKT
/// conditions off the active set.
fn active_set_solve(g: &[f64], c: &[f64], m: usize, lambda: f64, beta: &mut [f64], grad: &mut [f64], active: &[usize]) -> bool {
    let k = active.len();
    if k == 0 {
        return false;
    }
    let mut gaa = DenseMatrix::zeros(k, k);
    for (a, &ja) in active.iter().enumerate() {
        for (b, &jb) in active.iter().enumerate() {
            gaa[(a, b)] = g[ja * m + jb];
        }
    }
    let Some(l) = cholesky(&gaa) else {
        return false;
    };
    let rhs: Vec<f64> = active.iter().map(|&j| c[j] - lambda * beta[j].signum()).collect();
    let sol = cholesky_solve(&l, &rhs);
    if sol.iter().zip(active).any(|(v, &j)| !(v.is_finite() && v.signum() == beta[j].signum() && *v != 0.0)) {
        return false;
    }
    let mut cand = vec![0.0; m];
    for (v, &j) in sol.iter().zip(active) {
        cand[j] = *v;
    }
    let cand_grad: Vec<f64> = (0..m).map(|j| c[j] - dot(&g[j * m..(j + 1) * m], &cand)).collect();
    let all: Vec<usize> = (0..m).collect();
    if kkt_from_gradient(&cand_grad, &cand, lambda, &all) >= CD_KKT_TOL {
        return false;
    }
    beta.copy_from_slice(&cand);
    grad.copy_from_slice(&cand_grad);
    true
}

fn kkt_from_gradient(grad: &[f64], beta: &[f64], lambda: f64, coords: &[usize]) -> f64 {
    coords
        .iter()
        .map(|&j| if beta[j] == 0.0 { grad[j].abs() - lambda } else { (grad[j] - lambda * beta[j].signum()).abs() })
        .fold(0.0, f64::max)
}

/// One pass over `coords`; returns the largest coefficient change.
fn coordinate_sweep(g: &[f64], m: usize, lambda: f64, beta: &mut [f64], grad: &mut [f64], coords: &[usize]) -> f64 {
    let mut max_change = 0.0f64;
    for &j in coords {
        let gjj = g[j * m + j];
        if gjj <= 0.0 {
            continue;
        }
        let old = beta[j];
        let new = soft_threshold(grad[j] + gjj * old, lambda) / gjj;
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            let row = &g[j * m..(j + 1) * m];
            for (gr, gk) in grad.iter_mut().zip(row) {
                *gr -= gk * delta;
            }
            max_change = max_change.max(delta.abs());
        }
    }
    max_change
}

fn check_inputs(x: &DenseMatrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} responses", x.rows()),
            found: format!("{}", y.len()),
        });
    }
    if x.rows() < 2 {
        return Err(Error::invalid("lasso needs at least 2 observations"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("response contains non-finite values"));
    }
    Ok(())
}

fn cross_products(x: &DenseMatrix, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let m = x.cols();
    let mut g = vec![0.0; m * m];
    let mut c = vec![0.0; m];
    for r in 0..x.rows() {
        let row = x.row(r);
        for a in 0..m {
            c[a] += row[a] * y[r];
            for b in a..m {
                g[a * m + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..m {
        c[a] /= n;
        for b in a..m {
            g[a * m + b] /= n;
            g[b * m + a] = g[a * m + b];
        }
    }
    (g, c)
}

fn residual_ss(x: &DenseMatrix, y: &[f64], beta: &[f64]) -> f64 {
    (0..x.rows()).map(|r| {
        let e = y[r] - dot(x.row(r), beta);
        e * e
    }).sum()
}

fn finish(x: &DenseMatrix, y: &[f64], beta: Vec<f64>, lambda: f64) -> LassoFit {
    let n = x.rows();
    let s_hat = beta.iter().filter(|b| **b != 0.0).count();
    let rss = residual_ss(x, y, &beta);
    let mse_df = if n > s_hat { rss / (n - s_hat) as f64 } else { 0.0 };
    LassoFit { beta, lambda, s_hat, mse_df }
}

/// Minimize `(1/2n)‖y − Xβ‖² + λ‖β‖₁` by cyclic coordinate descent.
pub fn lasso_cd(x: &DenseMatrix, y: &[f64], lambda: f64) -> Result<LassoFit> {
    check_inputs(x, y)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let (g, c) = cross_products(x, y);
    let mut beta = vec![0.0; x.cols()];
    cd_gram(&g, &c, x.cols(), lambda, &mut beta)?;
    Ok(finish(x, y, beta, lambda))
}

/// Warm-started fits along a decreasing penalty sequence.
pub fn lasso_path(x: &DenseMatrix, y: &[f64], lambdas: &[f64]) -> Result<Vec<LassoFit>> {
    check_inputs(x, y)?;
    let (g, c) = cross_products(x, y);
    let mut beta = vec![0.0; x.cols()];
    lambdas
        .iter()
        .map(|&l| {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("lambda must be positive, got {l}")));
            }
            cd_gram(&g, &c, x.cols(), l, &mut beta)?;
            Ok(finish(x, y, beta.clone(), l))
        })
        .collect()
}

/// Smallest penalty giving β = 0: max_j |X_jᵀy|/n.
pub fn lambda_max(x: &DenseMatrix, y: &[f64]) -> f64 {
    let n = x.rows() as f64;
    (0..x.cols())
        .map(|j| (0..x.rows()).map(|r| x[(r, j)] * y[r]).sum::<f64>().abs() / n)
        .fold(0.0, f64::max)
}

/// Largest KKT violation of `fit`, computed from the data:
/// `|X_jᵀr/n| − λ` for inactive `j`, `|X_jᵀr/n − λ·sign(β_j)|` for active `j`.
pub fn kkt_violation(x: &DenseMatrix, y: &[f64], fit: &LassoFit) -> f64 {
    let n = x.rows() as f64;
    let resid: Vec<f64> = (0..x.rows()).map(|r| y[r] - dot(x.row(r), &fit.beta)).collect();
    let mut worst = 0.0f64;
    for j in 0..x.cols() {
        let gj = (0..x.rows()).map(|r| x[(r, j)] * resid[r]).sum::<f64>() / n;
        let v = if fit.beta[j] == 0.0 {
            gj.abs() - fit.lambda
        } else {
            (gj - fit.lambda * fit.beta[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// `num` points log-spaced from `hi` down to `hi·ratio`.
pub fn lambda_grid(hi: f64, ratio: f64, num: usize) -> Vec<f64> {
    if num == 1 {
        return vec![hi];
    }
    let step = ratio.ln() / (num - 1) as f64;
    (0..num).map(|k| hi * (step * k as f64).exp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalConfig {
    pub folds: usize,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    /// Seed for the fold assignment.
    pub seed: u64,
}

impl Default for DiagonalConfig {
    fn default() -> Self {
        Self { folds: DEFAULT_FOLDS, n_lambda: DEFAULT_N_LAMBDA, lambda_ratio: DEFAULT_LAMBDA_RATIO, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnEstimate {
    pub omega_hat: f64,
    pub lambda: f64,
    pub s_hat: usize,
    pub mse_df: f64,
    pub cv_mse: f64,
    /// Set when the cross-validated fit saturated or left no residual and
    /// the λ_max fit was used instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEstimate {
    pub omega_hat: Vec<f64>,
    pub columns: Vec<ColumnEstimate>,
    pub config: DiagonalConfig,
}

impl DiagonalEstimate {
    pub fn flagged(&self) -> Vec<usize> {
        self.columns.iter().enumerate().filter(|(_, c)| c.fallback).map(|(i, _)| i).collect()
    }
}

/// Estimate every ω_ii with `folds`-fold cross-validation and default grid.
pub fn estimate_diagonal(y: &DenseMatrix, folds: usize) -> Result<DiagonalEstimate> {
    estimate_diagonal_with(y, &DiagonalConfig { folds, ..DiagonalConfig::default() })
}

/// Row-to-fold assignment: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngStream::new(seed, 0);
    for k in (1..n).rev() {
        let j = rng.index(k + 1);
        order.swap(k, j);
    }
    let mut fold = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % folds;
    }
    fold
}

/// Submatrix of a p×p Gram without row/column `i`, and its column `i`.
fn split_gram(s: &DenseMatrix, i: usize, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let p = s.rows();
    let idx: Vec<usize> = (0..p).filter(|&k| k != i).collect();
    let m = idx.len();
    let mut g = vec![0.0; m * m];
    let mut c = vec![0.0; m];
    for (a, &ka) in idx.iter().enumerate() {
        c[a] = s[(ka, i)] * scale;
        for (b, &kb) in idx.iter().enumerate() {
            g[a * m + b] = s[(ka, kb)] * scale;
        }
    }
    (g, c)
}

fn quad_form(g: &[f64], beta: &[f64]) -> f64 {
    let m = beta.len();
    (0..m)
        .filter(|&a| beta[a] != 0.0)
        .map(|a| beta[a] * dot(&g[a * m..(a + 1) * m], beta))
        .sum()
}

pub fn estimate_diagonal_with(y: &DenseMatrix, cfg: &DiagonalConfig) -> Result<DiagonalEstimate> {
    let (n, p) = (y.rows(), y.cols());
    if p < 2 {
        return Err(Error::invalid("diagonal estimation needs at least 2 columns"));
    }
    if cfg.folds < 2 || cfg.folds > n {
        return Err(Error::invalid(format!("fold count {} must lie in [2, n = {n}]", cfg.folds)));
    }
    if cfg.n_lambda == 0 || !(cfg.lambda_ratio > 0.0 && cfg.lambda_ratio < 1.0) {
        return Err(Error::invalid("lambda grid needs n_lambda >= 1 and ratio in (0, 1)"));
    }
    let s_full = gram(y)?;
    let fold = fold_assignment(n, cfg.folds, cfg.seed);
    let mut fold_rows: Vec<Vec<usize>> = vec![Vec::new(); cfg.folds];
    for (r, &f) in fold.iter().enumerate() {
        fold_rows[f].push(r);
    }
    let fold_grams: Vec<DenseMatrix> = fold_rows
        .iter()
        .map(|rows| {
            let mut data = Vec::with_capacity(rows.len() * p);
            for &r in rows {
                data.extend_from_slice(y.row(r));
            }
            DenseMatrix::new(rows.len(), p, data).and_then(|m| gram(&m)).map(|g| g.as_matrix().clone())
        })
        .collect::<Result<_>>()?;
    let train_grams: Vec<DenseMatrix> = fold_grams
        .iter()
        .map(|fg| s_full.as_matrix().sub(fg))
        .collect::<Result<_>>()?;

    let columns: Vec<ColumnEstimate> = (0..p)
        .into_par_iter()
        .map(|i| {
            estimate_column(y, s_full.as_matrix(), &fold_rows, &fold_grams, &train_grams, i, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(DiagonalEstimate { omega_hat: columns.iter().map(|c| c.omega_hat).collect(), columns, config: *cfg })
}

fn estimate_column(
    y: &DenseMatrix,
    s_full: &DenseMatrix,
    fold_rows: &[Vec<usize>],
    fold_grams: &[DenseMatrix],
    train_grams: &[DenseMatrix],
    i: usize,
    cfg: &DiagonalConfig,
) -> Result<ColumnEstimate> {
    let n = y.rows();
    let m = y.cols() - 1;
    let (g_full, c_full) = split_gram(s_full, i, 1.0 / n as f64);
    let lmax = c_full.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let yy = s_full[(i, i)];
    if !(yy > 0.0) {
        return Err(Error::numerical(format!("column {i} has zero variance; its diagonal is undefined")));
    }
    if lmax == 0.0 {
        // Uncorrelated with every other column: β = 0 at any penalty.
        let mse_df = yy / n as f64;
        return Ok(ColumnEstimate { omega_hat: 1.0 / mse_df, lambda: 0.0, s_hat: 0, mse_df, cv_mse: mse_df, fallback: false });
    }
    let grid = lambda_grid(lmax, cfg.lambda_ratio, cfg.n_lambda);

    let mut cv = vec![0.0; grid.len()];
    for (k, rows) in fold_rows.iter().enumerate() {
        let n_train = n - rows.len();
        let (g_tr, c_tr) = split_gram(&train_grams[k], i, 1.0 / n_train as f64);
        let (g_te, c_te) = split_gram(&fold_grams[k], i, 1.0);
        let yy_te = fold_grams[k][(i, i)];
        let mut beta = vec![0.0; m];
        for (l, &lam) in grid.iter().enumerate() {
            cd_gram(&g_tr, &c_tr, m, lam, &mut beta)?;
            let sse = yy_te - 2.0 * dot(&c_te, &beta) + quad_form(&g_te, &beta);
            cv[l] += sse.max(0.0);
        }
    }
    let cv: Vec<f64> = cv.into_iter().map(|v| v / n as f64).collect();
    // First minimum along the grid, so ties favour the sparser model.
    let best = (0..grid.len()).fold(0, |b, l| if cv[l] < cv[b] { l } else { b });

    let idx: Vec<usize> = (0..=m).filter(|&k| k != i).collect();
    let mut xdata = Vec::with_capacity(n * m);
    for r in 0..n {
        let row = y.row(r);
        xdata.extend(idx.iter().map(|&k| row[k]));
    }
    let x = DenseMatrix::new(n, m, xdata)?;
    let yi = y.column(i);

    let mut beta = vec![0.0; m];
    for &lam in &grid[..=best] {
        cd_gram(&g_full, &c_full, m, lam, &mut beta)?;
    }
    let fit = finish(&x, &yi, beta, grid[best]);
    let degenerate = |f: &LassoFit| n <= f.s_hat || !(f.mse_df > 1e-12 * yy / n as f64);
    let (fit, fallback) = if degenerate(&fit) {
        (finish(&x, &yi, vec![0.0; m], lmax), true)
    } else {
        (fit, false)
    };
    if degenerate(&fit) {
        return Err(Error::numerical(format!("column {i}: residual variance is zero even at lambda_max")));
    }
    Ok(ColumnEstimate {
        omega_hat: 1.0 / fit.mse_df,
        lambda: fit.lambda,
        s_hat: fit.s_hat,
        mse_df: fit.mse_df,
        cv_mse: cv[best],
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, m: usize, seed: u64) -> DenseMatrix {
        let mut rng = RngStream::new(seed, 0);
        DenseMatrix::new(n, m, (0..n * m).map(|_| rng.standard_normal()).collect()).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn single_unit_predictor_is_soft_threshold() {
        let x = DenseMatrix::new(4, 1, vec![1.0; 4]).unwrap();
        let y = [0.3, 1.1, 0.9, 2.1];
        let xty = y.iter().sum::<f64>() / 4.0;
        for lam in [0.1, 0.5, 1.0, 2.0] {
            let fit = lasso_cd(&x, &y, lam).unwrap();
            assert!((fit.beta[0] - soft_threshold(xty, lam)).abs() < 1e-9);
        }
    }

    #[test]
    fn null_threshold_gives_zero() {
        let x = random_matrix(30, 4, 1);
        let y = random_matrix(30, 1, 2).into_vec();
        let fit = lasso_cd(&x, &y, lambda_max(&x, &y) * 1.0000001).unwrap();
        assert!(fit.beta.iter().all(|b| *b == 0.0));
        assert_eq!(fit.s_hat, 0);
    }

    #[test]
    fn kkt_holds_along_path() {
        let x = random_matrix(40, 6, 3);
        let mut y = random_matrix(40, 1, 4).into_vec();
        for r in 0..40 {
            y[r] += 1.5 * x[(r, 0)] - 0.7 * x[(r, 3)];
        }
        let grid = lambda_grid(lambda_max(&x, &y), 1e-3, 30);
        for fit in lasso_path(&x, &y, &grid).unwrap() {
            assert!(kkt_violation(&x, &y, &fit) <= KKT_TOL, "lambda {}", fit.lambda);
        }
    }

    #[test]
    fn fold_assignment_is_balanced() {
        let f = fold_assignment(23, 5, 7);
        let mut counts = [0; 5];
        f.iter().for_each(|&k| counts[k] += 1);
        assert!(counts.iter().all(|&c| c == 4 || c == 5));
        assert_eq!(f, fold_assignment(23, 5, 7));
    }

    #[test]
    fn validation() {
        let y = random_matrix(10, 3, 1);
        assert!(estimate_diagonal(&y, 1).is_err());
        assert!(estimate_diagonal(&random_matrix(10, 1, 1), 5).is_err());
        assert!(lasso_cd(&y, &[1.0; 10], 0.0).is_err());
        assert!(lasso_cd(&y, &[1.0; 9], 0.1).is_err());
    }
}
