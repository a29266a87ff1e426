//! Symmetrization of an asymmetric estimate in the induced ℓ1 operator norm,
//! and the matrix norms used to assess it.
//!
//! The exact mode solves `min_{S = Sᵀ} ‖S − Ω̄‖_{ℓ1}` as a linear program. An
//! optimal `s_ij` can always be taken between `ω̄_ij` and `ω̄_ji`, since moving
//! it toward that interval shrinks both deviations. Writing
//! `s_ij = min + z_ij` with `0 ≤ z_ij ≤ |ω̄_ij − ω̄_ji|` makes both absolute
//! deviations linear in `z_ij`, so the program needs one bounded variable per
//! upper pair plus the column-sum bound `m`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::SampleStack;
use crate::matrix::{dot, DenseMatrix};
use crate::simplex::{solve, LpProblem, Relation};

/// Largest p for which `Auto` uses the exact program.
pub const AUTO_EXACT_MAX_P: usize = 30;
const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetrizeMode {
    Exact,
    Heuristic,
    Auto,
}

impl SymmetrizeMode {
    pub fn name(self) -> &'static str {
        match self {
            SymmetrizeMode::Exact => "exact",
            SymmetrizeMode::Heuristic => "heuristic",
            SymmetrizeMode::Auto => "auto",
        }
    }

    /// The concrete mode `Auto` resolves to for dimension `p`.
    pub fn resolve(self, p: usize) -> SymmetrizeMode {
        match self {
            SymmetrizeMode::Auto if p <= AUTO_EXACT_MAX_P => SymmetrizeMode::Exact,
            SymmetrizeMode::Auto => SymmetrizeMode::Heuristic,
            m => m,
        }
    }
}

impl fmt::Display for SymmetrizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SymmetrizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(SymmetrizeMode::Exact),
            "heuristic" => Ok(SymmetrizeMode::Heuristic),
            "auto" => Ok(SymmetrizeMode::Auto),
            _ => Err(Error::invalid(format!("unknown symmetrize mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Symmetrized {
    pub matrix: DenseMatrix,
    /// ‖S − Ω̄‖_{ℓ1}.
    pub objective: f64,
    /// Exact or heuristic; never `Auto`.
    pub mode: SymmetrizeMode,
}

/// Maximum absolute column sum.
pub fn operator_l1_norm(a: &DenseMatrix) -> Result<f64> {
    a.check_square("operator norm argument")?;
    let p = a.rows();
    Ok((0..p).map(|j| (0..p).map(|i| a[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max))
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    a.check_square("spectral norm argument")?;
    let p = a.rows();
    if a.as_slice().iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let at = a.transpose();
    let mut x: Vec<f64> = (0..p).map(|i| 1.0 + 0.1 * ((i * 7919 % 13) as f64)).collect();
    let mut prev = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let nx = dot(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        let ax = a.mat_vec(&x);
        let sigma2 = dot(&ax, &ax);
        if sigma2 == 0.0 {
            // Start vector in the null space; perturb deterministically.
            x = (0..p).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect();
            continue;
        }
        if (sigma2 - prev).abs() <= POWER_TOL * sigma2 {
            return Ok(sigma2.sqrt());
        }
        prev = sigma2;
        x = at.mat_vec(&ax);
    }
    Err(Error::NonConvergence(format!("spectral norm power iteration exceeded {POWER_MAX_ITER} iterations")))
}

/// Min-magnitude symmetrization; ties keep the upper-triangle value.
pub fn symmetrize_heuristic(omega_bar: &DenseMatrix) -> Result<DenseMatrix> {
    omega_bar.check_square("symmetrization input")?;
    let p = omega_bar.rows();
    let mut s = omega_bar.clone();
    for i in 0..p {
        for j in i + 1..p {
            let (a, b) = (omega_bar[(i, j)], omega_bar[(j, i)]);
            let v = if b.abs() < a.abs() { b } else { a };
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Exact ℓ1-operator-norm projection onto symmetric matrices.
pub fn symmetrize_exact(omega_bar: &DenseMatrix) -> Result<DenseMatrix> {
    omega_bar.check_square("symmetrization input")?;
    let p = omega_bar.rows();
    let mut pairs = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let (a, b) = (omega_bar[(i, j)], omega_bar[(j, i)]);
            if a != b {
                pairs.push((i, j, a.min(b), (a - b).abs(), a <= b));
            }
        }
    }
    let mut s = omega_bar.clone();
    if pairs.is_empty() {
        return Ok(s);
    }
    // Variables: z_k for each asymmetric pair, then m.
    let nv = pairs.len() + 1;
    let mut objective = vec![0.0; nv];
    objective[nv - 1] = 1.0;
    let mut lp = LpProblem::new(objective);
    let mut rows = vec![vec![0.0; nv]; p];
    let mut consts = vec![0.0; p];
    for (k, &(i, j, _, w, upper_is_low)) in pairs.iter().enumerate() {
        lp.set_bounds(k, 0.0, w);
        // Column j holds ω̄_ij, column i holds ω̄_ji. When ω̄_ij is the lower
        // value its deviation is z and the partner's is w − z.
        let (zcol, wcol) = if upper_is_low { (j, i) } else { (i, j) };
        rows[zcol][k] += 1.0;
        rows[wcol][k] -= 1.0;
        consts[wcol] += w;
    }
    for (mut row, c) in rows.into_iter().zip(consts) {
        if row.iter().all(|v| *v == 0.0) && c == 0.0 {
            continue;
        }
        row[nv - 1] = -1.0;
        lp.add(row, Relation::Le, -c);
    }
    let sol = solve(&lp)?;
    for (k, &(i, j, lo, w, _)) in pairs.iter().enumerate() {
        let v = lo + sol.x[k].clamp(0.0, w);
        s[(i, j)] = v;
        s[(j, i)] = v;
    }
    Ok(s)
}

/// Symmetrize `omega_bar`. Symmetric input is returned unchanged and the
/// diagonal always passes through.
pub fn symmetrize_l1(omega_bar: &DenseMatrix, mode: SymmetrizeMode) -> Result<Symmetrized> {
    omega_bar.check_square("symmetrization input")?;
    let used = mode.resolve(omega_bar.rows());
    if omega_bar.is_symmetric() {
        return Ok(Symmetrized { matrix: omega_bar.clone(), objective: 0.0, mode: used });
    }
    let matrix = match used {
        SymmetrizeMode::Exact => symmetrize_exact(omega_bar)?,
        _ => symmetrize_heuristic(omega_bar)?,
    };
    let objective = operator_l1_norm(&matrix.sub(omega_bar)?)?;
    Ok(Symmetrized { matrix, objective, mode: used })
}

/// Symmetrize every retained draw individually.
pub fn symmetrize_samples(samples: &SampleStack, mode: SymmetrizeMode) -> Result<SampleStack> {
    let p = samples.p();
    let mut data = Vec::with_capacity(samples.as_slice().len());
    for t in 0..samples.len() {
        let m = DenseMatrix::new(p, p, samples.sample(t).to_vec())?;
        data.extend(symmetrize_l1(&m, mode)?.matrix.into_vec());
    }
    SampleStack::from_raw(p, data)
}
