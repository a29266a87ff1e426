//! Synthetic ground-truth precision matrices and Gaussian data drawn from them.
//!
//! Six sparsity patterns are supported. All have unit diagonal; groups are
//! contiguous index blocks of `group_size` variables.
//!
//! | pattern          | off-diagonal rule                                                  |
//! |------------------|--------------------------------------------------------------------|
//! | `Random`         | each pair w.p. `edge_prob`, value −U(0.2, 0.8)                      |
//! | `Hubs`           | first member of each group is a hub: ω_{i,h} = 0.25                  |
//! | `Cliques`        | first `clique_size` members of each group: ω_ij = −0.45               |
//! | `HubsRandom`     | Hubs, plus one −U(0.2, 0.8) edge per group pair selected w.p. 1/K     |
//! | `CliquesRandom`  | cliques at −0.3, every other pair 0.2 w.p. `edge_prob`               |
//! | `HubsCliques`    | first half of the groups hubs at −0.2, the rest cliques at 0.5       |
//!
//! Randomized patterns are redrawn until the matrix clears the positive
//! definiteness floor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, min_eigenvalue_spd, min_eigenvalue_symmetric, solve_upper_transposed};
use crate::matrix::DenseMatrix;
use crate::rng::RngStream;

pub const DEFAULT_PD_FLOOR: f64 = 0.05;
/// At p = 100 only about one Random draw in 1300 clears the default floor,
/// so the cap sits well above that.
pub const DEFAULT_MAX_ATTEMPTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    Random,
    Hubs,
    Cliques,
    HubsRandom,
    CliquesRandom,
    HubsCliques,
}

impl PatternKind {
    pub const ALL: [PatternKind; 6] = [
        PatternKind::Random,
        PatternKind::Hubs,
        PatternKind::Cliques,
        PatternKind::HubsRandom,
        PatternKind::CliquesRandom,
        PatternKind::HubsCliques,
    ];

    pub fn uses_groups(self) -> bool {
        !matches!(self, PatternKind::Random)
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, PatternKind::Random | PatternKind::HubsRandom | PatternKind::CliquesRandom)
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Random => "random",
            PatternKind::Hubs => "hubs",
            PatternKind::Cliques => "cliques",
            PatternKind::HubsRandom => "hubs-random",
            PatternKind::CliquesRandom => "cliques-random",
            PatternKind::HubsCliques => "hubs-cliques",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', '+', ' '], "-");
        PatternKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown pattern '{s}'")))
    }
}

/// Declarative description of a ground-truth generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub p: usize,
    pub seed: u64,
    /// Selection probability for random edges; defaults to 1/p.
    pub edge_prob: f64,
    pub group_size: usize,
    pub clique_size: usize,
    pub hub_value: f64,
    pub clique_value: f64,
    /// Random-edge magnitudes are −U(low, high).
    pub random_low: f64,
    pub random_high: f64,
    pub cliques_random_within: f64,
    pub cliques_random_between: f64,
    pub hubs_cliques_hub: f64,
    pub hubs_cliques_clique: f64,
    pub pd_floor: f64,
    pub max_attempts: usize,
}

impl PatternSpec {
    pub fn new(kind: PatternKind, p: usize, seed: u64) -> Self {
        Self {
            kind,
            p,
            seed,
            edge_prob: 1.0 / p.max(1) as f64,
            group_size: 10,
            clique_size: 3,
            hub_value: 0.25,
            clique_value: -0.45,
            random_low: 0.2,
            random_high: 0.8,
            cliques_random_within: -0.3,
            cliques_random_between: 0.2,
            hubs_cliques_hub: -0.2,
            hubs_cliques_clique: 0.5,
            pd_floor: DEFAULT_PD_FLOOR,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.p / self.group_size.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::invalid(format!("p must be at least 2, got {}", self.p)));
        }
        if !(self.edge_prob > 0.0 && self.edge_prob < 1.0) {
            return Err(Error::invalid(format!("edge probability must lie in (0, 1), got {}", self.edge_prob)));
        }
        if !(0.0 <= self.random_low && self.random_low <= self.random_high) {
            return Err(Error::invalid("random-edge magnitude range must satisfy 0 <= low <= high"));
        }
        if self.kind.uses_groups() {
            if self.group_size < 2 {
                return Err(Error::invalid("group size must be at least 2"));
            }
            if self.p % self.group_size != 0 {
                return Err(Error::invalid(format!(
                    "p = {} is not divisible by the group size {}",
                    self.p, self.group_size
                )));
            }
            if self.clique_size < 2 || self.clique_size > self.group_size {
                return Err(Error::invalid(format!(
                    "clique size {} must lie in [2, group size {}]",
                    self.clique_size, self.group_size
                )));
            }
        }
        if self.kind == PatternKind::HubsCliques && self.n_groups() < 2 {
            return Err(Error::invalid("hubs-cliques needs at least two groups"));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be at least 1"));
        }
        Ok(())
    }
}

/// A generated precision matrix with its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub omega_star: DenseMatrix,
    /// Upper-triangular pairs `(i, j)`, `i < j`, with nonzero ω*_ij.
    pub support: Vec<(usize, usize)>,
    pub min_eig: f64,
    /// Generation attempts used before the PD floor was cleared.
    pub attempts: usize,
}

impl GroundTruth {
    pub fn from_matrix(omega_star: DenseMatrix, pd_floor: f64) -> Result<Self> {
        omega_star.check_square("ground truth")?;
        if !omega_star.is_symmetric() {
            return Err(Error::invalid("ground truth must be exactly symmetric"));
        }
        let pd = check_pd(&omega_star, pd_floor);
        if !pd.ok {
            return Err(Error::invalid(format!(
                "ground truth min eigenvalue {:.4} is below the floor {pd_floor}",
                pd.min_eig_estimate
            )));
        }
        let support = support_of(&omega_star);
        Ok(Self { omega_star, support, min_eig: pd.min_eig_estimate, attempts: 1 })
    }

    pub fn p(&self) -> usize {
        self.omega_star.rows()
    }

    /// Number of nonzero upper-triangular entries.
    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    /// Per-column nonzero off-diagonal counts s*_j.
    pub fn column_degrees(&self) -> Vec<usize> {
        degrees(self.p(), &self.support)
    }

    /// Maximum column degree d*.
    pub fn max_degree(&self) -> usize {
        self.column_degrees().into_iter().max().unwrap_or(0)
    }
}

pub(crate) fn degrees(p: usize, support: &[(usize, usize)]) -> Vec<usize> {
    let mut d = vec![0; p];
    for &(i, j) in support {
        d[i] += 1;
        d[j] += 1;
    }
    d
}

fn support_of(m: &DenseMatrix) -> Vec<(usize, usize)> {
    let p = m.rows();
    let mut s = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if m[(i, j)] != 0.0 {
                s.push((i, j));
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdCheck {
    pub ok: bool,
    pub min_eig_estimate: f64,
}

/// Positive-definiteness test with margin: `A − floor·I` must admit a Cholesky
/// factor. The smallest eigenvalue is refined by inverse iteration when it does.
pub fn check_pd(a: &DenseMatrix, floor: f64) -> PdCheck {
    let p = a.rows();
    let mut shifted = a.clone();
    for i in 0..p {
        shifted[(i, i)] -= floor;
    }
    if cholesky(&shifted).is_some() {
        let l = cholesky(a).expect("A is PD when A - floor*I is");
        PdCheck { ok: true, min_eig_estimate: min_eigenvalue_spd(a, &l) }
    } else {
        PdCheck { ok: false, min_eig_estimate: min_eigenvalue_symmetric(a) }
    }
}

fn clears_floor(a: &DenseMatrix, floor: f64) -> bool {
    let mut shifted = a.clone();
    for i in 0..a.rows() {
        shifted[(i, i)] -= floor;
    }
    cholesky(&shifted).is_some()
}

/// Cheap rejection test. For each row, A restricted to span{e_i, u} with
/// u ∝ A_{N(i), i} is a 2×2 compression whose smallest eigenvalue bounds
/// λ_min(A) from above.
fn star_bound_ok(a: &DenseMatrix, floor: f64) -> bool {
    let p = a.rows();
    let mut neigh = Vec::new();
    (0..p).all(|i| {
        neigh.clear();
        neigh.extend((0..p).filter(|&k| k != i && a[(k, i)] != 0.0));
        if neigh.is_empty() {
            return true;
        }
        let b2: f64 = neigh.iter().map(|&k| a[(k, i)] * a[(k, i)]).sum();
        let q = neigh
            .iter()
            .map(|&k| neigh.iter().map(|&l| a[(k, i)] * a[(k, l)] * a[(l, i)]).sum::<f64>())
            .sum::<f64>()
            / b2;
        let (d, half) = (a[(i, i)], 0.5 * (a[(i, i)] - q));
        0.5 * (d + q) - (half * half + b2).sqrt() >= floor
    })
}

fn set_sym(m: &mut DenseMatrix, i: usize, j: usize, v: f64) {
    m[(i, j)] = v;
    m[(j, i)] = v;
}

fn random_magnitude(spec: &PatternSpec, rng: &mut RngStream) -> f64 {
    -(spec.random_low + (spec.random_high - spec.random_low) * rng.uniform())
}

fn add_hub(m: &mut DenseMatrix, start: usize, size: usize, value: f64) {
    let hub = start;
    for i in start + 1..start + size {
        set_sym(m, i, hub, value);
    }
}

fn add_clique(m: &mut DenseMatrix, start: usize, size: usize, value: f64) {
    for i in start..start + size {
        for j in i + 1..start + size {
            set_sym(m, i, j, value);
        }
    }
}

fn build(spec: &PatternSpec, rng: &mut RngStream) -> DenseMatrix {
    let p = spec.p;
    let g = spec.group_size;
    let k = spec.n_groups();
    let mut m = DenseMatrix::identity(p);
    match spec.kind {
        PatternKind::Random => {
            for i in 0..p {
                for j in i + 1..p {
                    if rng.uniform() < spec.edge_prob {
                        let v = random_magnitude(spec, rng);
                        set_sym(&mut m, i, j, v);
                    }
                }
            }
        }
        PatternKind::Hubs => {
            for grp in 0..k {
                add_hub(&mut m, grp * g, g, spec.hub_value);
            }
        }
        PatternKind::Cliques => {
            for grp in 0..k {
                add_clique(&mut m, grp * g, spec.clique_size, spec.clique_value);
            }
        }
        PatternKind::HubsRandom => {
            for grp in 0..k {
                add_hub(&mut m, grp * g, g, spec.hub_value);
            }
            let pair_prob = 1.0 / k as f64;
            for k1 in 0..k {
                for k2 in k1 + 1..k {
                    if rng.uniform() < pair_prob {
                        let i = k1 * g + rng.index(g);
                        let j = k2 * g + rng.index(g);
                        let v = random_magnitude(spec, rng);
                        set_sym(&mut m, i, j, v);
                    }
                }
            }
        }
        PatternKind::CliquesRandom => {
            for grp in 0..k {
                add_clique(&mut m, grp * g, spec.clique_size, spec.cliques_random_within);
            }
            for i in 0..p {
                for j in i + 1..p {
                    if m[(i, j)] == 0.0 && rng.uniform() < spec.edge_prob {
                        set_sym(&mut m, i, j, spec.cliques_random_between);
                    }
                }
            }
        }
        PatternKind::HubsCliques => {
            let hubs = k.div_ceil(2);
            for grp in 0..k {
                if grp < hubs {
                    add_hub(&mut m, grp * g, g, spec.hubs_cliques_hub);
                } else {
                    add_clique(&mut m, grp * g, spec.clique_size, spec.hubs_cliques_clique);
                }
            }
        }
    }
    m
}

/// Build the ground truth for `spec`, redrawing randomized parts until the
/// smallest eigenvalue clears `spec.pd_floor`.
pub fn generate_pattern(spec: &PatternSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let attempts = if spec.kind.is_randomized() { spec.max_attempts } else { 1 };
    let mut last = None;
    for attempt in 0..attempts {
        let mut rng = RngStream::new(spec.seed, attempt as u64);
        let m = build(spec, &mut rng);
        if star_bound_ok(&m, spec.pd_floor) && clears_floor(&m, spec.pd_floor) {
            let pd = check_pd(&m, spec.pd_floor);
            let support = support_of(&m);
            return Ok(GroundTruth { omega_star: m, support, min_eig: pd.min_eig_estimate, attempts: attempt + 1 });
        }
        last = Some(m);
    }
    let last_min = last.map_or(f64::NAN, |m| min_eigenvalue_symmetric(&m));
    Err(Error::numerical(format!(
        "{} pattern with p = {} did not reach min eigenvalue {} in {attempts} attempt(s) (last {last_min:.4})",
        spec.kind, spec.p, spec.pd_floor
    )))
}

/// Draw `n` rows from N(0, Ω*⁻¹): with Ω* = L Lᵀ each row solves Lᵀ x = z.
pub fn sample_mvn(truth: &GroundTruth, n: usize, stream: &mut RngStream) -> Result<DenseMatrix> {
    let p = truth.p();
    let l = cholesky(&truth.omega_star)
        .ok_or_else(|| Error::numerical("ground truth lost positive definiteness"))?;
    let mut data = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = stream.standard_normal());
        data.extend(solve_upper_transposed(&l, &z));
    }
    DenseMatrix::new(n, p, data)
}
