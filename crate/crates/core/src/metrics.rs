//! Evaluation metrics and MCMC diagnostics.
//!
//! Edge selection follows the credible-interval rule: pair `(i, j)` is an
//! edge when the interval of `ω_ij` or that of `ω_ji` excludes zero. Rates
//! are counted over upper-triangular pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{PosteriorSummary, SortedSamples};
use crate::matrix::DenseMatrix;
use crate::simgen::{degrees, GroundTruth};
use crate::symmetrize::spectral_norm;

pub const DEFAULT_ROC_POINTS: usize = 200;
pub const DEFAULT_ROC_MIN: f64 = 0.01;
pub const DEFAULT_ROC_MAX: f64 = 0.9999;
/// Convergence threshold for the potential scale reduction factor.
pub const RHAT_THRESHOLD: f64 = 1.1;

/// ‖est − truth‖_F.
pub fn frobenius_error(est: &DenseMatrix, truth: &DenseMatrix) -> Result<f64> {
    Ok(est.sub(truth)?.frobenius_norm())
}

/// Symmetric set of selected pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    p: usize,
    selected: Vec<bool>,
}

impl EdgeSet {
    pub fn empty(p: usize) -> Self {
        Self { p, selected: vec![false; p * p] }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn insert(&mut self, i: usize, j: usize) {
        if i != j {
            self.selected[i * self.p + j] = true;
            self.selected[j * self.p + i] = true;
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.selected[i * self.p + j]
    }

    /// Selected upper-triangular pairs in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for i in 0..self.p {
            for j in i + 1..self.p {
                if self.contains(i, j) {
                    v.push((i, j));
                }
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.pairs().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn excludes_zero((lo, hi): (f64, f64)) -> bool {
    lo > 0.0 || hi < 0.0
}

/// OR-rule selection at `level` from entry-sorted samples.
pub fn select_edges_sorted(sorted: &SortedSamples, level: f64) -> Result<EdgeSet> {
    let p = sorted.p();
    let mut set = EdgeSet::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            if excludes_zero(sorted.interval(i, j, level)?) || excludes_zero(sorted.interval(j, i, level)?) {
                set.insert(i, j);
            }
        }
    }
    Ok(set)
}

/// OR-rule selection at `level`, using a precomputed band when available.
pub fn select_edges(summary: &PosteriorSummary, level: f64) -> Result<EdgeSet> {
    if let Some(band) = summary.band(level) {
        let p = summary.p;
        let mut set = EdgeSet::empty(p);
        for i in 0..p {
            for j in i + 1..p {
                let ij = (band.lower[(i, j)], band.upper[(i, j)]);
                let ji = (band.lower[(j, i)], band.upper[(j, i)]);
                if excludes_zero(ij) || excludes_zero(ji) {
                    set.insert(i, j);
                }
            }
        }
        return Ok(set);
    }
    select_edges_sorted(&SortedSamples::new(&summary.samples), level)
}

/// Auxiliary rule: pair selected when either orientation of the estimate
/// exceeds `a_n` in magnitude.
pub fn select_by_threshold(estimate: &DenseMatrix, a_n: f64) -> Result<EdgeSet> {
    estimate.check_square("estimate")?;
    let p = estimate.rows();
    let mut set = EdgeSet::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            if estimate[(i, j)].abs() > a_n || estimate[(j, i)].abs() > a_n {
                set.insert(i, j);
            }
        }
    }
    Ok(set)
}

/// True and false positive rates. A rate is `None` when its denominator is
/// zero (empty support, or a complete support with no null pairs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub empty_support: bool,
}

pub fn tpr_fpr(selected: &EdgeSet, support: &[(usize, usize)], p: usize) -> Result<Rates> {
    if selected.p() != p {
        return Err(Error::DimensionMismatch { expected: format!("p = {p}"), found: format!("p = {}", selected.p()) });
    }
    let mut truth = EdgeSet::empty(p);
    for &(i, j) in support {
        if i >= p || j >= p || i == j {
            return Err(Error::invalid(format!("support pair ({i}, {j}) is invalid for p = {p}")));
        }
        truth.insert(i, j);
    }
    let n_support = truth.len();
    let n_null = p * (p - 1) / 2 - n_support;
    let (mut tp, mut fp) = (0, 0);
    for (i, j) in selected.pairs() {
        if truth.contains(i, j) {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    Ok(Rates {
        tpr: (n_support > 0).then(|| tp as f64 / n_support as f64),
        fpr: (n_null > 0).then(|| fp as f64 / n_null as f64),
        true_positives: tp,
        false_positives: fp,
        empty_support: n_support == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub level: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// `DEFAULT_ROC_POINTS` levels log-spaced from 0.01 to 0.9999.
pub fn default_roc_levels() -> Vec<f64> {
    log_spaced(DEFAULT_ROC_MIN, DEFAULT_ROC_MAX, DEFAULT_ROC_POINTS)
}

pub fn log_spaced(lo: f64, hi: f64, num: usize) -> Vec<f64> {
    if num == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..num).map(|k| (a + (b - a) * k as f64 / (num - 1) as f64).exp()).collect();
    v[num - 1] = hi;
    v
}

/// Selection and rates at every level. Requires a nonempty support and at
/// least one null pair.
pub fn roc_sweep(sorted: &SortedSamples, support: &[(usize, usize)], levels: &[f64]) -> Result<Vec<RocPoint>> {
    if levels.is_empty() {
        return Err(Error::invalid("ROC needs at least one level"));
    }
    if levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("ROC levels must be strictly increasing"));
    }
    let p = sorted.p();
    levels
        .iter()
        .map(|&level| {
            let r = tpr_fpr(&select_edges_sorted(sorted, level)?, support, p)?;
            match (r.tpr, r.fpr) {
                (Some(tpr), Some(fpr)) => Ok(RocPoint { level, fpr, tpr }),
                _ => Err(Error::invalid("ROC is undefined without both true edges and null pairs")),
            }
        })
        .collect()
}

/// Classic potential scale reduction factor `√((W(m−1)/m + B/m)/W)`.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::invalid("Gelman-Rubin needs at least 2 chains"));
    }
    let m = chains[0].len();
    if m < 10 || chains.iter().any(|c| c.len() != m) {
        return Err(Error::invalid("Gelman-Rubin needs equal-length chains of at least 10 draws"));
    }
    let k = chains.len() as f64;
    let mf = m as f64;
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / mf).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (mf - 1.0))
        .sum::<f64>()
        / k;
    if !(w > 0.0) {
        return Err(Error::numerical("Gelman-Rubin is undefined for zero within-chain variance"));
    }
    let grand = means.iter().sum::<f64>() / k;
    let b_over_m = means.iter().map(|mu| (mu - grand) * (mu - grand)).sum::<f64>() / (k - 1.0);
    Ok(((w * (mf - 1.0) / mf + b_over_m) / w).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhatEntry {
    pub name: String,
    pub value: f64,
}

/// R̂ for ‖Ω‖_F, τ² and each monitored entry over post-burn-in iterations.
pub fn monitored_rhat(summary: &PosteriorSummary) -> Result<Vec<RhatEntry>> {
    let burn = summary.config.burn_in;
    let tail = |v: &Vec<f64>| v[burn..].to_vec();
    let mut out = vec![
        RhatEntry { name: "frob_norm".into(), value: gelman_rubin(&summary.chains.iter().map(|c| tail(&c.norm)).collect::<Vec<_>>())? },
        RhatEntry { name: "tau2".into(), value: gelman_rubin(&summary.chains.iter().map(|c| tail(&c.tau2)).collect::<Vec<_>>())? },
    ];
    for (k, &(j, i)) in summary.chains[0].entries.iter().enumerate() {
        let series: Vec<Vec<f64>> = summary.chains.iter().map(|c| tail(&c.entry_traces[k])).collect();
        out.push(RhatEntry { name: format!("omega[{j},{i}]"), value: gelman_rubin(&series)? });
    }
    Ok(out)
}

/// Standard deviation over mean of the last `window` values.
pub fn trace_relative_sd(trace: &[f64], window: usize) -> Result<f64> {
    if window < 2 || trace.len() < window {
        return Err(Error::invalid(format!("trace of length {} has no window of {window}", trace.len())));
    }
    let w = &trace[trace.len() - window..];
    let mu = w.iter().sum::<f64>() / window as f64;
    let var = w.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (window - 1) as f64;
    Ok(var.sqrt() / mu.abs())
}

/// Reference contraction rates for a support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionRates {
    /// √(S*·log p / n) with S* counted over ordered pairs.
    pub epsilon_n: f64,
    /// d*·√(log p / n).
    pub rate_spectral: f64,
    /// S* over ordered pairs (each edge counted in both columns).
    pub s_star_ordered: usize,
    /// Upper-triangular edge count.
    pub s_star_upper: usize,
    pub d_star: usize,
}

pub fn contraction_rates(p: usize, n: usize, support: &[(usize, usize)]) -> Result<ContractionRates> {
    if p < 2 || n == 0 {
        return Err(Error::invalid("contraction rates need p >= 2 and n >= 1"));
    }
    if support.iter().any(|&(i, j)| i >= p || j >= p || i == j) {
        return Err(Error::invalid("support pair out of range"));
    }
    let deg = degrees(p, support);
    let s_star: usize = deg.iter().sum();
    let d_star = deg.into_iter().max().unwrap_or(0);
    let lr = (p as f64).ln() / n as f64;
    Ok(ContractionRates {
        epsilon_n: (s_star as f64 * lr).sqrt(),
        rate_spectral: d_star as f64 * lr.sqrt(),
        s_star_ordered: s_star,
        s_star_upper: support.len(),
        d_star,
    })
}

/// Metrics of one fit against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frob_error: f64,
    pub spectral_error: f64,
    pub level: f64,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub n_selected: usize,
    pub roc: Vec<RocPoint>,
    pub rates: ContractionRates,
    pub n: usize,
    /// R̂ per monitored scalar; empty for single-chain fits.
    pub gelman_rubin: Vec<RhatEntry>,
    pub gelman_rubin_variant: String,
}

/// Evaluate `estimate` (the point estimate, typically the symmetrized
/// posterior mean) and `summary` against `truth`.
pub fn evaluate(
    summary: &PosteriorSummary,
    estimate: &DenseMatrix,
    truth: &GroundTruth,
    n: usize,
    level: f64,
    roc_levels: &[f64],
) -> Result<EvalReport> {
    let diff = estimate.sub(&truth.omega_star)?;
    let sorted = SortedSamples::new(&summary.samples);
    let sel = select_edges_sorted(&sorted, level)?;
    let r = tpr_fpr(&sel, &truth.support, truth.p())?;
    let roc = if roc_levels.is_empty() { Vec::new() } else { roc_sweep(&sorted, &truth.support, roc_levels)? };
    let gelman_rubin = if summary.chains.len() > 1 { monitored_rhat(summary)? } else { Vec::new() };
    Ok(EvalReport {
        frob_error: diff.frobenius_norm(),
        spectral_error: spectral_norm(&diff)?,
        level,
        tpr: r.tpr,
        fpr: r.fpr,
        n_selected: sel.len(),
        roc,
        rates: contraction_rates(truth.p(), n, &truth.support)?,
        n,
        gelman_rubin,
        gelman_rubin_variant: "classic".into(),
    })
}
