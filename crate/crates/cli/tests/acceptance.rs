//! Acceptance suite. Prints one PASS/FAIL line per criterion and a final
//! count of failures.
//!
//! `QGGM_ACCEPTANCE_ONLY=3,7` runs a subset. `QGGM_ACCEPTANCE_STRICT=1` makes
//! any failure exit non-zero.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use qggm_cli::artifacts::{parse_roc_csv, ReportFile};
use qggm_cli::commands::{fit_matrix, DATA_STREAM};
use qggm_cli::RunConfig;
use qggm_core::diagonal::{
    estimate_diagonal, fold_assignment, lambda_grid, lambda_max, lasso_cd, lasso_path, LassoFit, DEFAULT_FOLDS,
    DEFAULT_LAMBDA_RATIO, DEFAULT_N_LAMBDA, KKT_TOL,
};
use qggm_core::gibbs::{auxiliary_rate, global_scale_params, kappa_rate, local_scale_rate, omega_conditional};
use qggm_core::metrics::{default_roc_levels, evaluate, frobenius_error, monitored_rhat, trace_relative_sd};
use qggm_core::prior::{check_concentration, horseshoe_mass_outside, DEFAULT_QUAD_TOL};
use qggm_core::simgen::{generate_pattern, sample_mvn, GroundTruth, PatternKind, PatternSpec};
use qggm_core::symmetrize::{symmetrize_l1, SymmetrizeMode};
use qggm_core::{gram, log_pseudo_likelihood, DenseMatrix, HorseshoeState, PrecisionDraw, PriorConditionSpec, RngStream};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("QGGM_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "cliques accuracy, p=100 n=150", criterion_1),
        (2, "random accuracy, p=100 n=150", criterion_2),
        (3, "hubs support arithmetic", criterion_3),
        (4, "full-conditional oracle", criterion_4),
        (5, "convergence with 4 chains", criterion_5),
        (6, "rate scaling n=150 vs n=600", criterion_6),
        (7, "symmetrization optimality", criterion_7),
        (8, "prior-condition checker", criterion_8),
        (9, "diagonal estimator", criterion_9),
        (10, "pipeline smoke, six patterns", criterion_10),
    ];
    let mut failed = 0;
    for (k, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&k)) {
            continue;
        }
        let t = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("criterion {k:>2}: PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {k:>2}: FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        if std::env::var_os("QGGM_ACCEPTANCE_STRICT").is_some_and(|v| v != "0") {
            std::process::exit(1);
        }
    } else {
        println!("all criteria passed");
    }
}

// ---------------------------------------------------------------- helpers

fn fit_config(known_diag: bool, chains: usize, seed: u64) -> RunConfig {
    RunConfig {
        command: "fit".into(),
        iters: Some(6000),
        burn_in: Some(1000),
        thin: Some(10),
        chains: Some(chains),
        seed: Some(seed),
        known_diag: Some(known_diag),
        symmetrize: Some("auto".into()),
        level: Some(0.5),
        folds: Some(5),
        ..Default::default()
    }
}

fn replicate(truth: &GroundTruth, n: usize, seed: u64) -> DenseMatrix {
    sample_mvn(truth, n, &mut RngStream::new(seed, DATA_STREAM)).unwrap()
}

struct Scores {
    frob: Vec<f64>,
    tpr: Vec<f64>,
    fpr: Vec<f64>,
}

impl Scores {
    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }
    fn sd(v: &[f64]) -> f64 {
        let m = Self::mean(v);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }
    fn line(&self, tag: &str) -> String {
        format!(
            "{tag} frob {:.3} ({:.3}) TPR {:.2}% FPR {:.3}%",
            Self::mean(&self.frob),
            Self::sd(&self.frob),
            100.0 * Self::mean(&self.tpr),
            100.0 * Self::mean(&self.fpr)
        )
    }
}

/// Fit `reps` replicates with the full pipeline and score the symmetrized
/// posterior mean against the truth.
fn score(truth: &GroundTruth, n: usize, reps: usize, data_seed: u64, known_diag: bool) -> Scores {
    let mut s = Scores { frob: Vec::new(), tpr: Vec::new(), fpr: Vec::new() };
    for r in 0..reps {
        let y = replicate(truth, n, data_seed + r as u64);
        let out = fit_matrix(&y, Path::new("replicate"), &fit_config(known_diag, 1, r as u64), Some(truth)).unwrap();
        let est = &out.artifact.estimate;
        // Independent Frobenius error straight from the definition.
        let p = truth.p();
        let frob = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .map(|(i, j)| (est[(i, j)] - truth.omega_star[(i, j)]).powi(2))
            .sum::<f64>()
            .sqrt();
        let rep = evaluate(&out.summary(), est, truth, n, 0.5, &[]).unwrap();
        assert!((rep.frob_error - frob).abs() < 1e-10);
        s.frob.push(frob);
        s.tpr.push(rep.tpr.unwrap());
        s.fpr.push(rep.fpr.unwrap());
    }
    s
}

// ------------------------------------------------------------- criteria

const TRUTH_SEED: u64 = 2024;
const DATA_SEED: u64 = 100;

fn criterion_1() -> Outcome {
    let truth = generate_pattern(&PatternSpec::new(PatternKind::Cliques, 100, TRUTH_SEED)).unwrap();
    let known = score(&truth, 150, 5, DATA_SEED, true);
    let est = score(&truth, 150, 5, DATA_SEED, false);
    let fk = Scores::mean(&known.frob);
    let fe = Scores::mean(&est.frob);
    let rates_ok = [&known, &est].iter().all(|s| Scores::mean(&s.tpr) >= 0.95 && Scores::mean(&s.fpr) <= 0.01);
    check(
        (0.13..=1.43).contains(&fk) && (0.85..=2.75).contains(&fe) && rates_ok,
        format!("{}; {} (bands [0.13, 1.43] and [0.85, 2.75], TPR >= 95%, FPR <= 1%)", known.line("known-diag"), est.line("estimated-diag")),
    )
}

fn criterion_2() -> Outcome {
    let truth = generate_pattern(&PatternSpec::new(PatternKind::Random, 100, TRUTH_SEED)).unwrap();
    let est = score(&truth, 150, 5, DATA_SEED, false);
    let f = Scores::mean(&est.frob);
    check(
        (1.32..=2.52).contains(&f) && Scores::mean(&est.tpr) >= 0.85 && Scores::mean(&est.fpr) <= 0.01,
        format!("{} edges; {} (band [1.32, 2.52], TPR >= 85%, FPR <= 1%)", truth.support.len(), est.line("estimated-diag")),
    )
}

fn criterion_3() -> Outcome {
    let truth = generate_pattern(&PatternSpec::new(PatternKind::Hubs, 100, 0)).unwrap();
    let m = &truth.omega_star;
    let mut nonzero = 0;
    let mut all_quarter = true;
    let mut degree = [0usize; 100];
    for i in 0..100 {
        for j in i + 1..100 {
            if m[(i, j)] != 0.0 {
                nonzero += 1;
                all_quarter &= m[(i, j)] == 0.25;
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    let d_star = *degree.iter().max().unwrap();
    check(
        nonzero == 90 && all_quarter && d_star == 9 && truth.max_degree() == 9,
        format!("{nonzero} upper-triangular nonzeros, all 0.25: {all_quarter}, d* = {d_star}"),
    )
}

// Criterion 4: augmented quasi-posterior restricted to one coordinate.

const OP: usize = 3;
const ON: usize = 20;
const GRID: usize = 50;

#[derive(Clone)]
struct Point {
    diag: Vec<f64>,
    off: DenseMatrix,
    lambda2: DenseMatrix,
    v: DenseMatrix,
    tau2: f64,
    kappa: f64,
}

/// log q(Y | Ω) + log prior, with half-Cauchy scales as inverse-gamma mixtures.
fn log_joint(y: &DenseMatrix, pt: &Point) -> f64 {
    let omega = PrecisionDraw::new(pt.diag.clone(), pt.off.clone()).unwrap();
    let mut lp = log_pseudo_likelihood(y, &omega).unwrap();
    let ig_half = |x: f64, b: f64| 0.5 * b.ln() - 1.5 * x.ln() - b / x;
    for j in 0..OP {
        for i in 0..OP {
            if i != j {
                let (w, l2, v) = (pt.off[(j, i)], pt.lambda2[(j, i)], pt.v[(j, i)]);
                let var = l2 * pt.tau2;
                lp += -0.5 * (2.0 * PI * var).ln() - w * w / (2.0 * var) + ig_half(l2, 1.0 / v) + ig_half(v, 1.0);
            }
        }
    }
    lp + ig_half(pt.tau2, 1.0 / pt.kappa) + ig_half(pt.kappa, 1.0)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Largest normalized-density gap between two log-densities on a grid,
/// relative to the peak.
fn density_gap(xs: &[f64], lib: &[f64], oracle: &[f64]) -> f64 {
    let norm = |l: &[f64]| {
        let mx = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f: Vec<f64> = l.iter().map(|v| (v - mx).exp()).collect();
        let z = trapezoid(xs, &f);
        f.into_iter().map(|v| v / z).collect::<Vec<f64>>()
    };
    let (a, b) = (norm(lib), norm(oracle));
    let peak = a.iter().cloned().fold(0.0, f64::max);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / peak
}

fn criterion_4() -> Outcome {
    let mut rng = RngStream::new(4, 0);
    let y = DenseMatrix::new(ON, OP, (0..ON * OP).map(|_| rng.standard_normal()).collect()).unwrap();
    let s = gram(&y).unwrap();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for _ in 0..20 {
        let mut off = DenseMatrix::zeros(OP, OP);
        let mut lambda2 = DenseMatrix::zeros(OP, OP);
        let mut v = DenseMatrix::zeros(OP, OP);
        for j in 0..OP {
            for i in 0..OP {
                if i != j {
                    off[(j, i)] = 0.3 * rng.standard_normal();
                    lambda2[(j, i)] = rng.standard_normal().exp();
                    v[(j, i)] = rng.standard_normal().exp();
                }
            }
        }
        let pt = Point {
            diag: (0..OP).map(|_| 0.5 + 1.5 * rng.uniform()).collect(),
            off,
            lambda2,
            v,
            tau2: rng.standard_normal().exp(),
            kappa: rng.standard_normal().exp(),
        };
        // Reciprocal-scale conditionals are exponential or gamma in x = 1/scale;
        // the change of variables adds −2 log x to the oracle.
        let recip = |set: &dyn Fn(&mut Point, f64), shape: f64, rate: f64| {
            let (mean, sd) = (shape / rate, shape.sqrt() / rate);
            let xs = linspace((mean - 6.0 * sd).max(1e-3 / rate), mean + 6.0 * sd, GRID);
            let lib: Vec<f64> = xs.iter().map(|&x| (shape - 1.0) * x.ln() - rate * x).collect();
            let oracle: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    let mut q = pt.clone();
                    set(&mut q, 1.0 / x);
                    log_joint(&y, &q) - 2.0 * x.ln()
                })
                .collect();
            density_gap(&xs, &lib, &oracle)
        };
        for i in 0..OP {
            for j in 0..OP {
                if i == j {
                    continue;
                }
                let col: Vec<f64> = (0..OP).map(|r| pt.off[(r, i)]).collect();
                let c = omega_conditional(&col, pt.diag[i], &s, i, j, pt.lambda2[(j, i)], pt.tau2).unwrap();
                let sd = c.var.sqrt();
                let xs = linspace(c.mean - 5.0 * sd, c.mean + 5.0 * sd, GRID);
                let lib: Vec<f64> = xs.iter().map(|x| -(x - c.mean).powi(2) / (2.0 * c.var)).collect();
                let oracle: Vec<f64> = xs
                    .iter()
                    .map(|&x| {
                        let mut q = pt.clone();
                        q.off[(j, i)] = x;
                        log_joint(&y, &q)
                    })
                    .collect();
                worst = worst.max(density_gap(&xs, &lib, &oracle));
                let rate = local_scale_rate(pt.off[(j, i)], pt.tau2, pt.v[(j, i)]);
                worst = worst.max(recip(&|q, val| q.lambda2[(j, i)] = val, 1.0, rate));
                let rate = auxiliary_rate(pt.lambda2[(j, i)]);
                worst = worst.max(recip(&|q, val| q.v[(j, i)] = val, 1.0, rate));
                checks += 3;
            }
        }
        let omega = PrecisionDraw::new(pt.diag.clone(), pt.off.clone()).unwrap();
        let state = HorseshoeState::new(pt.lambda2.clone(), pt.v.clone(), pt.tau2, pt.kappa).unwrap();
        let (shape, rate) = global_scale_params(&state, &omega);
        worst = worst.max(recip(&|q, val| q.tau2 = val, shape, rate));
        worst = worst.max(recip(&|q, val| q.kappa = val, 1.0, kappa_rate(pt.tau2)));
        checks += 2;
    }
    check(worst <= 1e-6, format!("{checks} conditionals over 20 states, worst normalized gap {worst:.2e} (tolerance 1e-6)"))
}

fn criterion_5() -> Outcome {
    let truth = generate_pattern(&PatternSpec::new(PatternKind::Cliques, 100, TRUTH_SEED)).unwrap();
    let y = replicate(&truth, 150, DATA_SEED);
    let out = fit_matrix(&y, Path::new("replicate"), &fit_config(false, 4, 7), Some(&truth)).unwrap();
    let summary = out.summary();
    let rhat = monitored_rhat(&summary).unwrap();
    let get = |name: &str| rhat.iter().find(|e| e.name == name).unwrap().value;
    let (r_norm, r_tau) = (get("frob_norm"), get("tau2"));
    let rel: Vec<f64> = summary.chains.iter().map(|c| trace_relative_sd(&c.frob, 500).unwrap()).collect();
    let worst_rel = rel.iter().cloned().fold(0.0, f64::max);
    check(
        r_norm < 1.1 && r_tau < 1.1 && worst_rel < 0.1,
        format!("R-hat frob_norm {r_norm:.4}, tau2 {r_tau:.4}; last-500 sd/mean worst chain {worst_rel:.4}"),
    )
}

fn criterion_6() -> Outcome {
    let truth = generate_pattern(&PatternSpec::new(PatternKind::Random, 10, TRUTH_SEED)).unwrap();
    let small = score(&truth, 150, 10, DATA_SEED, false);
    let large = score(&truth, 600, 10, DATA_SEED + 1000, false);
    let (a, b) = (Scores::mean(&small.frob), Scores::mean(&large.frob));
    let ratio = a / b;
    check(
        (1.4..=2.9).contains(&ratio),
        format!("{} edges; mean frob n=150 {a:.4}, n=600 {b:.4}, ratio {ratio:.3} (band [1.4, 2.9])", truth.support.len()),
    )
}

fn uniform(p: usize, lo: f64, hi: f64, rng: &mut RngStream) -> DenseMatrix {
    DenseMatrix::new(p, p, (0..p * p).map(|_| lo + (hi - lo) * rng.uniform()).collect()).unwrap()
}

fn l1_op(a: &DenseMatrix) -> f64 {
    (0..a.cols()).map(|j| (0..a.rows()).map(|i| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn criterion_7() -> Outcome {
    let mut rng = RngStream::new(7, 0);
    let mut grid_gap = 0.0f64;
    // 2×2: scan the shared off-diagonal value.
    for _ in 0..20 {
        let mut m = uniform(2, -1.0, 1.0, &mut rng);
        m[(0, 0)] = 1.0;
        m[(1, 1)] = 1.0;
        let obj = symmetrize_l1(&m, SymmetrizeMode::Exact).unwrap().objective;
        let g = (0..=20_000)
            .map(|k| {
                let s = -1.0 + k as f64 * 1e-4;
                (s - m[(1, 0)]).abs().max((s - m[(0, 1)]).abs())
            })
            .fold(f64::INFINITY, f64::min);
        grid_gap = grid_gap.max((g - obj).abs());
    }
    // 3×3: scan two entries, minimize the third in closed form.
    for _ in 0..8 {
        let m = uniform(3, -0.3, 0.3, &mut rng);
        let obj = symmetrize_l1(&m, SymmetrizeMode::Exact).unwrap().objective;
        let h: f64 = 2e-4;
        let steps = (0.6 / h).round() as usize;
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            let s01 = -0.3 + a as f64 * h;
            for b in 0..=steps {
                let s02 = -0.3 + b as f64 * h;
                let c0 = (s01 - m[(1, 0)]).abs() + (s02 - m[(2, 0)]).abs();
                let a1 = (s01 - m[(0, 1)]).abs();
                let a2 = (s02 - m[(0, 2)]).abs();
                let (b1, b2) = (m[(2, 1)], m[(1, 2)]);
                let (lo, hi) = (b1.min(b2), b1.max(b2));
                let bal = if b1 <= b2 { (a2 - a1 + b1 + b2) / 2.0 } else { (a1 - a2 + b1 + b2) / 2.0 };
                for t in [b1, b2, bal.clamp(lo, hi)] {
                    best = best.min(c0.max(a1 + (t - b1).abs()).max(a2 + (t - b2).abs()));
                }
            }
        }
        grid_gap = grid_gap.max((best - obj).abs());
    }
    // 5×5: exact against heuristic, and the triangle bound for both outputs.
    let mut dominated = true;
    let mut worst_ratio = 0.0f64;
    for _ in 0..50 {
        let m = uniform(5, -1.0, 1.0, &mut rng);
        let e = symmetrize_l1(&m, SymmetrizeMode::Exact).unwrap();
        let h = symmetrize_l1(&m, SymmetrizeMode::Heuristic).unwrap();
        dominated &= e.objective <= h.objective + 1e-9;
        for _ in 0..10 {
            let a = uniform(5, -1.0, 1.0, &mut rng);
            let r = a.add(&a.transpose()).unwrap().scale(0.5);
            let base = l1_op(&m.sub(&r).unwrap());
            for out in [&e.matrix, &h.matrix] {
                worst_ratio = worst_ratio.max(l1_op(&out.sub(&r).unwrap()) / base);
            }
        }
    }
    check(
        grid_gap <= 2e-4 && dominated && worst_ratio <= 2.0 + 1e-9,
        format!("grid gap {grid_gap:.2e}, exact <= heuristic on 50/50: {dominated}, worst triangle ratio {worst_ratio:.3}"),
    )
}

fn criterion_8() -> Outcome {
    let (a_n, p, u) = (1e-3, 100usize, 0.5);
    let draws = 1_000_000;
    let mut rng = RngStream::new(8, 0);
    let mut prev = -1.0;
    let mut monotone = true;
    let mut worst_z = 0.0f64;
    for k in 0..5 {
        let alpha = 10f64.powf(-10.0 + 2.0 * k as f64);
        let spec = PriorConditionSpec { a_n, e_n: 1.0, p, u, c: 2.0, alpha };
        let m = check_concentration(&spec).unwrap().mass_outside;
        monotone &= m >= prev;
        prev = m;
        // ω = α·λ·z with λ half-Cauchy and z standard normal.
        let hits = (0..draws)
            .filter(|_| (alpha * (0.5 * PI * rng.uniform()).tan() * rng.standard_normal()).abs() > a_n)
            .count();
        let mc = hits as f64 / draws as f64;
        let se = (m * (1.0 - m) / draws as f64).sqrt().max(1.0 / draws as f64);
        worst_z = worst_z.max((m - mc).abs() / se);
    }
    let alpha = a_n * a_n / (p * p) as f64;
    let adm = check_concentration(&PriorConditionSpec { a_n, e_n: 1.0, p, u, c: 2.0, alpha }).unwrap();
    let direct = horseshoe_mass_outside(a_n, alpha, DEFAULT_QUAD_TOL).unwrap();
    check(
        monotone && worst_z <= 3.0 && adm.passes && direct <= (p as f64).powf(-(1.0 + u)),
        format!(
            "monotone {monotone}, worst MC deviation {worst_z:.2} SE, admissible mass {:.3e} vs bound {:.3e}",
            adm.mass_outside,
            (p as f64).powf(-(1.0 + u))
        ),
    )
}

/// Largest KKT violation from a freshly computed residual.
fn kkt(x: &DenseMatrix, y: &[f64], fit: &LassoFit) -> f64 {
    let (n, m) = (x.rows(), x.cols());
    let r: Vec<f64> = (0..n).map(|i| y[i] - (0..m).map(|j| x[(i, j)] * fit.beta[j]).sum::<f64>()).collect();
    (0..m)
        .map(|j| {
            let g = (0..n).map(|i| x[(i, j)] * r[i]).sum::<f64>() / n as f64;
            if fit.beta[j] == 0.0 {
                g.abs() - fit.lambda
            } else {
                (g - fit.lambda * fit.beta[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn split(y: &DenseMatrix, rows: &[usize], i: usize) -> (DenseMatrix, Vec<f64>) {
    let p = y.cols();
    let x: Vec<f64> = rows.iter().flat_map(|&r| (0..p).filter(|&k| k != i).map(move |k| y[(r, k)])).collect();
    (DenseMatrix::new(rows.len(), p - 1, x).unwrap(), rows.iter().map(|&r| y[(r, i)]).collect())
}

fn criterion_9() -> Outcome {
    let (n, p) = (2000, 5);
    let mut rng = RngStream::new(9, 0);
    let y = DenseMatrix::new(n, p, (0..n * p).map(|_| rng.standard_normal()).collect()).unwrap();
    let est = estimate_diagonal(&y, DEFAULT_FOLDS).unwrap();
    let in_band = est.omega_hat.iter().all(|w| (0.85..=1.15).contains(w));
    let folds = fold_assignment(n, DEFAULT_FOLDS, est.config.seed);
    let all: Vec<usize> = (0..n).collect();
    let mut worst = 0.0f64;
    let mut fits = 0;
    for i in 0..p {
        let (x, yi) = split(&y, &all, i);
        let grid = lambda_grid(lambda_max(&x, &yi), DEFAULT_LAMBDA_RATIO, DEFAULT_N_LAMBDA);
        let mut paths = vec![lasso_path(&x, &yi, &grid).unwrap()];
        let (xf, yf) = (x.clone(), yi.clone());
        for f in 0..DEFAULT_FOLDS {
            let train: Vec<usize> = all.iter().copied().filter(|&r| folds[r] != f).collect();
            let (xt, yt) = split(&y, &train, i);
            let path = lasso_path(&xt, &yt, &grid).unwrap();
            worst = worst.max(path.iter().map(|ft| kkt(&xt, &yt, ft)).fold(0.0, f64::max));
            fits += path.len();
        }
        let chosen = est.columns[i].lambda;
        if chosen > 0.0 {
            paths.push(vec![lasso_cd(&xf, &yf, chosen).unwrap()]);
        }
        for path in &paths {
            worst = worst.max(path.iter().map(|ft| kkt(&xf, &yf, ft)).fold(0.0, f64::max));
            fits += path.len();
        }
    }
    check(
        in_band && worst <= KKT_TOL,
        format!(
            "omega_hat {:?}; {fits} Lasso fits, worst KKT violation {worst:.2e} (tolerance {KKT_TOL:e})",
            est.omega_hat.iter().map(|w| (w * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn qggm(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qggm")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("qggm {args:?} exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))
    }
}

/// Every file under `dir` except wall-clock records, with the minutes
/// column stripped from table.csv.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            if name == "timing.json" {
                continue;
            }
            let mut bytes = fs::read(&path).unwrap();
            if name == "table.csv" {
                let text = String::from_utf8(bytes).unwrap();
                bytes = text
                    .lines()
                    .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string() + "\n")
                    .collect::<String>()
                    .into_bytes();
            }
            out.push((path, bytes));
        }
    }
    out.sort();
    out
}

fn pipeline(root: &Path, kind: PatternKind) -> Result<String, String> {
    let dir = root.join(kind.name());
    let (data, fit, eval, roc) = (dir.join("data"), dir.join("fit"), dir.join("eval"), dir.join("roc"));
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let truth = s(&data.join("truth.json"));
    qggm(&["simulate", "--pattern", kind.name(), "--p", "20", "--n", "60", "--seed", "5", "--out", &s(&data), "--force"])?;
    qggm(&["fit", "--input", &s(&data.join("y_000.csv")), "--truth", &truth, "--out", &s(&fit)])?;
    qggm(&["evaluate", "--fit", &s(&fit), "--truth", &truth, "--out", &s(&eval)])?;
    qggm(&["roc", "--fit", &s(&fit), "--truth", &truth, "--out", &s(&roc)])?;

    let report: ReportFile =
        serde_json::from_str(&fs::read_to_string(eval.join("report_000.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let r = &report.report;
    let complete = r.frob_error.is_finite()
        && r.spectral_error.is_finite()
        && r.tpr.is_some()
        && r.fpr.is_some()
        && r.roc.len() == default_roc_levels().len()
        && r.rates.epsilon_n > 0.0
        && r.n == 60;
    if !complete {
        return Err(format!("{}: incomplete report", kind.name()));
    }
    for file in [eval.join("roc_000.csv"), roc.join("roc_000.csv")] {
        let pts = parse_roc_csv(&fs::read_to_string(&file).map_err(|e| e.to_string())?, "roc").map_err(|e| e.to_string())?;
        if pts.windows(2).any(|w| w[1].0 > w[0].0 || w[1].1 > w[0].1) {
            return Err(format!("{}: non-monotone ROC in {}", kind.name(), file.display()));
        }
    }
    let fit_json: qggm_cli::artifacts::FitArtifact =
        serde_json::from_str(&fs::read_to_string(fit.join("fit.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let truth_m = &serde_json::from_str::<qggm_cli::artifacts::TruthFile>(&fs::read_to_string(&truth).unwrap())
        .unwrap()
        .truth
        .omega_star;
    let f = frobenius_error(&fit_json.estimate, truth_m).unwrap();
    if (f - r.frob_error).abs() > 1e-12 {
        return Err(format!("{}: report Frobenius error does not match the fit", kind.name()));
    }
    Ok(format!("{} frob {:.3}", kind.name(), r.frob_error))
}

fn criterion_10() -> Outcome {
    let tmp = std::env::temp_dir().join(format!("qggm-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    let mut notes = Vec::new();
    for kind in PatternKind::ALL {
        notes.push(pipeline(&tmp, kind)?);
    }
    let first = snapshot(&tmp);
    for kind in PatternKind::ALL {
        pipeline(&tmp, kind)?;
    }
    let deterministic = first == snapshot(&tmp);
    let files = first.len();
    let _ = fs::remove_dir_all(&tmp);
    check(deterministic, format!("{}; rerun identical over {files} files: {deterministic}", notes.join(", ")))
}
