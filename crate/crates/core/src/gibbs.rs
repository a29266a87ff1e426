//! Gibbs sampler for the quasi-posterior under the graphical horseshoe prior.
//!
//! With the diagonal of Ω held fixed, one sweep draws, in order:
//!
//! ```text
//! ω_ji | ·    ~ N(−(Σ_{k≠j} (ω_ki/ω_ii) s_kj) · V, V),   V = 1 / (s_jj/ω_ii + 1/(τ² λ_ji²))
//! 1/λ_ji² | · ~ Exp(rate = ω_ji² / (2τ²) + 1/v_ji)
//! 1/v_ji | ·  ~ Exp(rate = 1 + 1/λ_ji²)
//! 1/τ² | ·    ~ Gamma(shape = (p(p−1)+1)/2, rate = 1/κ + ½ Σ_{j≠i} ω_ji²/λ_ji²)
//! 1/κ | ·     ~ Exp(rate = 1 + 1/τ²)
//! ```
//!
//! The `k = i` term of the sum carries ω_ii/ω_ii = 1, i.e. it contributes
//! `s_ij`. Given τ² the column blocks are conditionally independent, so each
//! column draws from its own stream keyed by (iteration, column) and the
//! sweep gives the same chain whether columns run sequentially or in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, gram, DenseMatrix, GramMatrix, PrecisionDraw};
use crate::prior::{clamp_scale, HorseshoeState};
use crate::rng::{sample_exponential, sample_gamma, sample_normal, RngStream};

const KIND_OMEGA: u64 = 0;
const KIND_LOCAL: u64 = 1;
const KIND_GLOBAL: u64 = 2;
const KIND_INIT: u64 = 3;
const KIND_MONITOR: u64 = 4;

const COLUMN_BITS: u32 = 20;
const ITER_BITS: u32 = 40;

/// Number of randomly chosen off-diagonal entries whose traces are kept for
/// convergence diagnostics.
pub const MONITORED_ENTRIES: usize = 5;

/// Stream id for one (update kind, iteration, column) triple.
pub fn stream_id(kind: u64, iteration: u64, column: usize) -> u64 {
    debug_assert!((column as u64) < (1 << COLUMN_BITS));
    (kind << (COLUMN_BITS + ITER_BITS))
        | ((iteration & ((1 << ITER_BITS) - 1)) << COLUMN_BITS)
        | column as u64
}

/// Seed for chain `c`; chain 0 uses the configured seed unchanged.
pub fn chain_seed(seed: u64, chain: usize) -> u64 {
    seed ^ (chain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_chains: usize,
    pub column_parallel: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { n_iter: 6000, burn_in: 1000, thin: 10, seed: 0, n_chains: 1, column_parallel: false }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::invalid(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thinning stride must be at least 1"));
        }
        if self.n_chains == 0 {
            return Err(Error::invalid("at least one chain is required"));
        }
        if self.retained() < 2 {
            return Err(Error::invalid(format!(
                "(iterations - burn-in) / thin = {} retained draws; at least 2 are needed",
                self.retained()
            )));
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn retained(&self) -> usize {
        self.n_iter.saturating_sub(self.burn_in) / self.thin.max(1)
    }
}

/// Mean and variance of a Normal full conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    pub mean: f64,
    pub var: f64,
}

/// Full conditional of ω_ji given column `i` (`col[k]` = ω_ki, `col[i]` ignored).
pub fn omega_conditional(
    col: &[f64],
    diag_i: f64,
    s: &GramMatrix,
    i: usize,
    j: usize,
    lambda2_ji: f64,
    tau2: f64,
) -> Result<NormalParams> {
    // Σ_{k≠j} ω_ki s_kj, with ω_ii standing in at k = i.
    let srow = s.row(j);
    let mut acc = 0.0;
    for (k, (&w, &skj)) in col.iter().zip(srow).enumerate() {
        if k == j {
            continue;
        }
        acc += if k == i { diag_i * skj } else { w * skj };
    }
    let precision = s.get(j, j) / diag_i + 1.0 / (tau2 * lambda2_ji);
    let var = 1.0 / precision;
    let mean = -(acc / diag_i) * var;
    if !(mean.is_finite() && var.is_finite() && var > 0.0) {
        return Err(Error::numerical(format!(
            "degenerate conditional for omega[({j}, {i})]: mean {mean}, variance {var}"
        )));
    }
    Ok(NormalParams { mean, var })
}

/// Rate of the exponential conditional of 1/λ_ji².
pub fn local_scale_rate(omega_ji: f64, tau2: f64, v_ji: f64) -> f64 {
    omega_ji * omega_ji / (2.0 * tau2) + 1.0 / v_ji
}

/// Rate of the exponential conditional of 1/v_ji.
pub fn auxiliary_rate(lambda2_ji: f64) -> f64 {
    1.0 + 1.0 / lambda2_ji
}

/// Shape of the Gamma conditional of 1/τ²; one half per off-diagonal entry plus one half.
pub fn global_scale_shape(p: usize) -> f64 {
    ((p * p.saturating_sub(1)) as f64 + 1.0) / 2.0
}

/// (shape, rate) of the Gamma conditional of 1/τ².
pub fn global_scale_params(state: &HorseshoeState, omega: &PrecisionDraw) -> (f64, f64) {
    let p = omega.p();
    let off = omega.offdiag();
    let mut ss = 0.0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                let w = off[(j, i)];
                ss += w * w / state.lambda2[(j, i)];
            }
        }
    }
    (global_scale_shape(p), 1.0 / state.kappa + 0.5 * ss)
}

/// Rate of the exponential conditional of 1/κ.
pub fn kappa_rate(tau2: f64) -> f64 {
    1.0 + 1.0 / tau2
}

fn draw_column(
    col: &mut [f64],
    diag_i: f64,
    i: usize,
    s: &GramMatrix,
    lambda2_col: &[f64],
    tau2: f64,
    stream: &mut RngStream,
) -> Result<()> {
    for j in 0..col.len() {
        if j == i {
            continue;
        }
        let cond = omega_conditional(col, diag_i, s, i, j, lambda2_col[j], tau2)?;
        col[j] = sample_normal(stream, cond.mean, cond.var)?;
    }
    Ok(())
}

fn draw_local_column(
    omega_col: &[f64],
    i: usize,
    lambda2_col: &mut [f64],
    v_col: &mut [f64],
    tau2: f64,
    stream: &mut RngStream,
) -> Result<()> {
    for j in 0..omega_col.len() {
        if j == i {
            continue;
        }
        let inv_l = sample_exponential(stream, local_scale_rate(omega_col[j], tau2, v_col[j]))?;
        lambda2_col[j] = clamp_scale(1.0 / inv_l);
        let inv_v = sample_exponential(stream, auxiliary_rate(lambda2_col[j]))?;
        v_col[j] = clamp_scale(1.0 / inv_v);
    }
    Ok(())
}

fn check_dims(state: &HorseshoeState, omega: &PrecisionDraw, s: Option<&GramMatrix>) -> Result<()> {
    let p = omega.p();
    if state.p() != p || s.is_some_and(|s| s.p() != p) {
        return Err(Error::DimensionMismatch {
            expected: format!("p = {p} throughout"),
            found: format!("state p = {}, Gram p = {:?}", state.p(), s.map(GramMatrix::p)),
        });
    }
    Ok(())
}

/// Redraw column `i` of the off-diagonal block, entry by entry in increasing
/// row order, each draw conditioning on the entries already refreshed.
pub fn update_omega_column(
    state: &HorseshoeState,
    omega: &PrecisionDraw,
    s: &GramMatrix,
    i: usize,
    stream: &mut RngStream,
) -> Result<Vec<f64>> {
    check_dims(state, omega, Some(s))?;
    if i >= omega.p() {
        return Err(Error::invalid(format!("column {i} out of range")));
    }
    let mut col = omega.offdiag_column(i);
    let lambda2_col = state.lambda2.column(i);
    draw_column(&mut col, omega.diag()[i], i, s, &lambda2_col, state.tau2, stream)?;
    Ok(col)
}

/// Refresh every λ² then v, column by column, from one stream.
pub fn update_local_scales(state: &mut HorseshoeState, omega: &PrecisionDraw, stream: &mut RngStream) -> Result<()> {
    check_dims(state, omega, None)?;
    for i in 0..omega.p() {
        update_local_scales_column(state, omega, i, stream)?;
    }
    Ok(())
}

/// Refresh λ² and v for the entries of column `i`.
pub fn update_local_scales_column(
    state: &mut HorseshoeState,
    omega: &PrecisionDraw,
    i: usize,
    stream: &mut RngStream,
) -> Result<()> {
    let omega_col = omega.offdiag_column(i);
    let mut l = state.lambda2.column(i);
    let mut v = state.v.column(i);
    draw_local_column(&omega_col, i, &mut l, &mut v, state.tau2, stream)?;
    scatter_column(&mut state.lambda2, i, &l);
    scatter_column(&mut state.v, i, &v);
    Ok(())
}

/// Refresh τ² then κ.
pub fn update_global_scale(state: &mut HorseshoeState, omega: &PrecisionDraw, stream: &mut RngStream) -> Result<()> {
    check_dims(state, omega, None)?;
    let (shape, rate) = global_scale_params(state, omega);
    let inv_tau2 = sample_gamma(stream, shape, rate)?;
    state.tau2 = clamp_scale(1.0 / inv_tau2);
    let inv_kappa = sample_exponential(stream, kappa_rate(state.tau2))?;
    state.kappa = clamp_scale(1.0 / inv_kappa);
    Ok(())
}

fn scatter_column(m: &mut DenseMatrix, i: usize, col: &[f64]) {
    for (j, &x) in col.iter().enumerate() {
        if j != i {
            m[(j, i)] = x;
        }
    }
}

/// Column-block part of one sweep: every listed column's ω entries, then
/// every listed column's local scales. Each column owns its stream, so the
/// result does not depend on `order` or on `parallel`.
pub fn sweep_columns(
    omega: &mut PrecisionDraw,
    state: &mut HorseshoeState,
    s: &GramMatrix,
    seed: u64,
    iteration: u64,
    order: &[usize],
    parallel: bool,
) -> Result<()> {
    check_dims(state, omega, Some(s))?;
    let tau2 = state.tau2;

    let omega_ref = &*omega;
    let state_ref = &*state;
    let draw_omega = |&i: &usize| -> Result<(usize, Vec<f64>)> {
        let mut stream = RngStream::new(seed, stream_id(KIND_OMEGA, iteration, i));
        let mut col = omega_ref.offdiag_column(i);
        let lcol = state_ref.lambda2.column(i);
        draw_column(&mut col, omega_ref.diag()[i], i, s, &lcol, tau2, &mut stream)?;
        Ok((i, col))
    };
    let cols: Vec<(usize, Vec<f64>)> = if parallel {
        order.par_iter().map(draw_omega).collect::<Result<_>>()?
    } else {
        order.iter().map(draw_omega).collect::<Result<_>>()?
    };
    for (i, col) in &cols {
        omega.set_offdiag_column(*i, col);
    }

    let state_ref = &*state;
    let draw_local = |(i, ocol): &(usize, Vec<f64>)| -> Result<(usize, Vec<f64>, Vec<f64>)> {
        let i = *i;
        let mut stream = RngStream::new(seed, stream_id(KIND_LOCAL, iteration, i));
        let mut l = state_ref.lambda2.column(i);
        let mut v = state_ref.v.column(i);
        draw_local_column(ocol, i, &mut l, &mut v, tau2, &mut stream)?;
        Ok((i, l, v))
    };
    let locals: Vec<(usize, Vec<f64>, Vec<f64>)> = if parallel {
        cols.par_iter().map(draw_local).collect::<Result<_>>()?
    } else {
        cols.iter().map(draw_local).collect::<Result<_>>()?
    };
    for (i, l, v) in &locals {
        scatter_column(&mut state.lambda2, *i, l);
        scatter_column(&mut state.v, *i, v);
    }
    Ok(())
}

/// One full sweep: all columns, then the global scale.
pub fn gibbs_sweep(
    omega: &mut PrecisionDraw,
    state: &mut HorseshoeState,
    s: &GramMatrix,
    seed: u64,
    iteration: u64,
    parallel: bool,
) -> Result<()> {
    let order: Vec<usize> = (0..omega.p()).collect();
    sweep_columns(omega, state, s, seed, iteration, &order, parallel)?;
    let mut stream = RngStream::new(seed, stream_id(KIND_GLOBAL, iteration, 0));
    update_global_scale(state, omega, &mut stream)
}

/// Starting point of chain `chain`. Chain 0 starts at ω = 0 with unit scales;
/// later chains start overdispersed: ω_ji ~ N(0, 0.1²) and τ² alternating
/// between 0.01 (odd chains) and 100 (even chains).
pub fn initial_state(diag: &[f64], chain: usize, seed: u64) -> Result<(PrecisionDraw, HorseshoeState)> {
    let p = diag.len();
    let mut omega = PrecisionDraw::from_diag(diag.to_vec())?;
    let mut state = HorseshoeState::initial(p);
    if chain > 0 {
        let mut stream = RngStream::new(seed, stream_id(KIND_INIT, chain as u64, 0));
        let off = omega.offdiag_mut();
        for j in 0..p {
            for i in 0..p {
                if i != j {
                    off[(j, i)] = sample_normal(&mut stream, 0.0, 0.01)?;
                }
            }
        }
        state.tau2 = if chain % 2 == 1 { 0.01 } else { 100.0 };
    }
    Ok((omega, state))
}

/// Retained draws stored sample-major: sample `t` occupies
/// `data[t·p² .. (t+1)·p²]`, row-major, diagonal included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleStack {
    p: usize,
    data: Vec<f64>,
}

impl SampleStack {
    pub fn new(p: usize) -> Self {
        Self { p, data: Vec::new() }
    }

    pub fn from_raw(p: usize, data: Vec<f64>) -> Result<Self> {
        if p == 0 || data.len() % (p * p) != 0 {
            return Err(Error::invalid(format!(
                "sample buffer of length {} is not a whole number of {p}x{p} draws",
                data.len()
            )));
        }
        Ok(Self { p, data })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        if self.p == 0 {
            0
        } else {
            self.data.len() / (self.p * self.p)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, draw: &PrecisionDraw) {
        let p = self.p;
        let off = draw.offdiag().as_slice();
        let start = self.data.len();
        self.data.extend_from_slice(off);
        for i in 0..p {
            self.data[start + i * p + i] = draw.diag()[i];
        }
    }

    pub fn extend(&mut self, other: &SampleStack) {
        debug_assert_eq!(self.p, other.p);
        self.data.extend_from_slice(&other.data);
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        let pp = self.p * self.p;
        &self.data[t * pp..(t + 1) * pp]
    }

    /// All retained values of entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Vec<f64> {
        let pp = self.p * self.p;
        let off = i * self.p + j;
        (0..self.len()).map(|t| self.data[t * pp + off]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> DenseMatrix {
        let pp = self.p * self.p;
        let mut acc = vec![0.0; pp];
        for t in 0..self.len() {
            for (a, &x) in acc.iter_mut().zip(self.sample(t)) {
                *a += x;
            }
        }
        let n = self.len().max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        DenseMatrix::new(self.p, self.p, acc).expect("finite sample mean")
    }
}

/// Empirical quantile with linear interpolation between order statistics at
/// position `(N + 1)·q` (1-based), clamped to the sample range.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n as f64 + 1.0) * q;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor();
    let frac = h - lo;
    let k = lo as usize - 1;
    sorted[k] + frac * (sorted[k + 1] - sorted[k])
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("credible level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Equal-tailed interval of sorted values at `level`.
pub fn interval_sorted(sorted: &[f64], level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if sorted.len() < 2 {
        return Err(Error::invalid("at least two retained samples are needed for an interval"));
    }
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(sorted, tail), quantile_sorted(sorted, 1.0 - tail)))
}

/// Equal-tailed credible interval for entry `(i, j)`.
pub fn credible_interval(samples: &SampleStack, i: usize, j: usize, level: f64) -> Result<(f64, f64)> {
    check_level(level)?;
    if i >= samples.p() || j >= samples.p() {
        return Err(Error::invalid(format!("entry ({i}, {j}) out of range")));
    }
    let mut v = samples.entry(i, j);
    v.sort_by(f64::total_cmp);
    interval_sorted(&v, level)
}

/// Entry-major sorted copy of a sample stack, so intervals at many levels
/// cost no re-sorting.
#[derive(Debug, Clone)]
pub struct SortedSamples {
    p: usize,
    n: usize,
    data: Vec<f64>,
}

impl SortedSamples {
    pub fn new(stack: &SampleStack) -> Self {
        let p = stack.p();
        let n = stack.len();
        let mut data = vec![0.0; p * p * n];
        for t in 0..n {
            for (e, &x) in stack.sample(t).iter().enumerate() {
                data[e * n + t] = x;
            }
        }
        data.par_chunks_mut(n.max(1)).for_each(|c| c.sort_by(f64::total_cmp));
        Self { p, n, data }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        let e = i * self.p + j;
        &self.data[e * self.n..(e + 1) * self.n]
    }

    pub fn interval(&self, i: usize, j: usize, level: f64) -> Result<(f64, f64)> {
        interval_sorted(self.entry(i, j), level)
    }
}

/// Interval bounds for every entry at one credible level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleBand {
    pub level: f64,
    pub lower: DenseMatrix,
    pub upper: DenseMatrix,
}

/// Per-iteration monitoring series of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    /// ‖Ω_t − Ω_ref‖_F.
    pub frob: Vec<f64>,
    /// ‖Ω_t‖_F.
    pub norm: Vec<f64>,
    pub tau2: Vec<f64>,
    /// Monitored off-diagonal entries and their per-iteration values.
    pub entries: Vec<(usize, usize)>,
    pub entry_traces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub p: usize,
    pub diag: Vec<f64>,
    pub mean: DenseMatrix,
    /// Retained draws of all chains, chain 0 first.
    pub samples: SampleStack,
    pub bands: Vec<CredibleBand>,
    pub chains: Vec<ChainTrace>,
    pub config: GibbsConfig,
}

impl PosteriorSummary {
    /// Frobenius-distance trace of chain 0.
    pub fn frob_trace(&self) -> &[f64] {
        &self.chains[0].frob
    }

    pub fn tau2_trace(&self) -> &[f64] {
        &self.chains[0].tau2
    }

    pub fn band(&self, level: f64) -> Option<&CredibleBand> {
        self.bands.iter().find(|b| b.level == level)
    }
}

/// Choose the monitored off-diagonal entries for a run.
pub fn monitored_entries(p: usize, seed: u64) -> Vec<(usize, usize)> {
    if p < 2 {
        return Vec::new();
    }
    let total = p * (p - 1);
    let want = MONITORED_ENTRIES.min(total);
    let mut stream = RngStream::new(seed, stream_id(KIND_MONITOR, 0, 0));
    let mut picked: Vec<(usize, usize)> = Vec::with_capacity(want);
    while picked.len() < want {
        let k = stream.index(total);
        let (j, r) = (k / (p - 1), k % (p - 1));
        let i = if r >= j { r + 1 } else { r };
        if !picked.contains(&(j, i)) {
            picked.push((j, i));
        }
    }
    picked
}

fn frob_distance(omega: &PrecisionDraw, reference: &DenseMatrix) -> f64 {
    let p = omega.p();
    let off = omega.offdiag().as_slice();
    let r = reference.as_slice();
    let mut acc = 0.0;
    for a in 0..p {
        for b in 0..p {
            let x = if a == b { omega.diag()[a] } else { off[a * p + b] };
            let d = x - r[a * p + b];
            acc += d * d;
        }
    }
    acc.sqrt()
}

fn frob_norm(omega: &PrecisionDraw) -> f64 {
    let off = omega.offdiag().as_slice().iter().map(|x| x * x).sum::<f64>();
    (off + dot(omega.diag(), omega.diag())).sqrt()
}

/// Output of one chain before pooling.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub samples: SampleStack,
    pub trace: ChainTrace,
    pub final_omega: PrecisionDraw,
    pub final_state: HorseshoeState,
}

/// Run chain `chain` from its designated starting point.
pub fn run_single_chain(
    s: &GramMatrix,
    diag: &[f64],
    config: &GibbsConfig,
    chain: usize,
    reference: &DenseMatrix,
) -> Result<ChainRun> {
    config.validate()?;
    let p = diag.len();
    let seed = chain_seed(config.seed, chain);
    let (mut omega, mut state) = initial_state(diag, chain, seed)?;
    let entries = monitored_entries(p, config.seed);
    let mut trace = ChainTrace {
        frob: Vec::with_capacity(config.n_iter),
        norm: Vec::with_capacity(config.n_iter),
        tau2: Vec::with_capacity(config.n_iter),
        entry_traces: vec![Vec::with_capacity(config.n_iter); entries.len()],
        entries,
    };
    let mut samples = SampleStack::new(p);
    for t in 1..=config.n_iter {
        gibbs_sweep(&mut omega, &mut state, s, seed, t as u64, config.column_parallel)
            .map_err(|e| Error::numerical(format!("chain {chain}, iteration {t}: {e}")))?;
        trace.frob.push(frob_distance(&omega, reference));
        trace.norm.push(frob_norm(&omega));
        trace.tau2.push(state.tau2);
        for (k, &(j, i)) in trace.entries.iter().enumerate() {
            trace.entry_traces[k].push(omega.get(j, i));
        }
        if t > config.burn_in && (t - config.burn_in) % config.thin == 0 {
            samples.push(&omega);
        }
    }
    Ok(ChainRun { samples, trace, final_omega: omega, final_state: state })
}

/// Pool chain outputs into a posterior summary.
pub fn summarize(
    runs: Vec<ChainRun>,
    diag: &[f64],
    config: &GibbsConfig,
    credible_levels: &[f64],
) -> Result<PosteriorSummary> {
    for &l in credible_levels {
        check_level(l)?;
    }
    let p = diag.len();
    let mut samples = SampleStack::new(p);
    let mut chains = Vec::with_capacity(runs.len());
    for run in runs {
        samples.extend(&run.samples);
        chains.push(run.trace);
    }
    let mut mean = samples.mean();
    for (i, &d) in diag.iter().enumerate() {
        mean[(i, i)] = d;
    }
    let mut bands = Vec::with_capacity(credible_levels.len());
    if !credible_levels.is_empty() {
        let sorted = SortedSamples::new(&samples);
        for &level in credible_levels {
            let mut lower = DenseMatrix::zeros(p, p);
            let mut upper = DenseMatrix::zeros(p, p);
            for a in 0..p {
                for b in 0..p {
                    let (lo, hi) = sorted.interval(a, b, level)?;
                    lower[(a, b)] = lo;
                    upper[(a, b)] = hi;
                }
            }
            bands.push(CredibleBand { level, lower, upper });
        }
    }
    Ok(PosteriorSummary { p, diag: diag.to_vec(), mean, samples, bands, chains, config: *config })
}

/// Reference matrix for the Frobenius trace when no truth is supplied:
/// the given diagonal with zero off-diagonal.
pub fn default_reference(diag: &[f64]) -> DenseMatrix {
    DenseMatrix::from_diag(diag)
}

/// Run `config.n_chains` chains on data `y` with the diagonal frozen at
/// `diag` and summarize the pooled retained draws.
pub fn run_chain(
    y: &DenseMatrix,
    diag: &[f64],
    config: &GibbsConfig,
    credible_levels: &[f64],
    reference: Option<&DenseMatrix>,
) -> Result<PosteriorSummary> {
    config.validate()?;
    if y.cols() != diag.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} diagonal entries", y.cols()),
            found: format!("{}", diag.len()),
        });
    }
    crate::matrix::validate_diag(diag)?;
    let p = diag.len();
    if p >= (1 << COLUMN_BITS) {
        return Err(Error::invalid(format!("p = {p} is too large")));
    }
    let default_ref;
    let reference = match reference {
        Some(r) => {
            if r.rows() != p || r.cols() != p {
                return Err(Error::DimensionMismatch {
                    expected: format!("{p}x{p} reference"),
                    found: format!("{}x{}", r.rows(), r.cols()),
                });
            }
            r
        }
        None => {
            default_ref = default_reference(diag);
            &default_ref
        }
    };
    let s = gram(y)?;
    let runs: Vec<ChainRun> = if config.n_chains > 1 {
        (0..config.n_chains)
            .into_par_iter()
            .map(|c| run_single_chain(&s, diag, config, c, reference))
            .collect::<Result<_>>()?
    } else {
        vec![run_single_chain(&s, diag, config, 0, reference)?]
    };
    summarize(runs, diag, config, credible_levels)
}
