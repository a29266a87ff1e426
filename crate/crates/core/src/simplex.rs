//! Dense two-phase tableau simplex for small linear programs.
//!
//! Variable bounds are removed by substitution: a finite lower bound shifts
//! the variable, a finite upper bound becomes an explicit row, and a free
//! variable is split into a difference of two nonnegative parts. Dantzig's
//! rule is used until a run of degenerate pivots exceeds twice the number of
//! columns, after which Bland's rule takes over for the rest of the solve.

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Minimize `objectiveᵀx` subject to the constraints and `lower ≤ x ≤ upper`.
/// Infinite bounds are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
    pub bland_engaged: bool,
}

impl LpProblem {
    /// `n` variables with bounds `[0, ∞)` and no constraints.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { objective, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = (lower, upper);
    }

    pub fn set_free(&mut self, var: usize) {
        self.bounds[var] = (f64::NEG_INFINITY, f64::INFINITY);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch { expected: format!("{n} bounds"), found: format!("{}", self.bounds.len()) });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("LP objective has non-finite coefficients"));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("{n} coefficients in constraint {k}"),
                    found: format!("{}", c.coeffs.len()),
                });
            }
            if c.coeffs.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::invalid(format!("constraint {k} has non-finite entries")));
            }
        }
        for (k, &(l, u)) in self.bounds.iter().enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::invalid(format!("variable {k} has invalid bounds [{l}, {u}]")));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint or bound violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (&(l, u), &v) in self.bounds.iter().zip(x) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }
}

/// How an original variable is recovered from nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum Map {
    /// x = offset + z
    Shift { col: usize, offset: f64 },
    /// x = offset − z
    Flip { col: usize, offset: f64 },
    /// x = z⁺ − z⁻
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows` constraint rows then one objective row, each `cols + 1` wide
    /// with the right-hand side last.
    t: Vec<f64>,
    basis: Vec<usize>,
    barred: Vec<bool>,
    pivots: usize,
    degenerate_run: usize,
    bland: bool,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn obj_row(&self) -> usize {
        self.rows
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let pv = self.at(pr, pc);
        for c in 0..w {
            self.t[pr * w + c] /= pv;
        }
        let prow: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.t[r * w + pc];
            if f != 0.0 {
                let row = &mut self.t[r * w..(r + 1) * w];
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    fn entering(&self) -> Option<usize> {
        let o = self.obj_row();
        let candidates = (0..self.cols).filter(|&c| !self.barred[c] && self.at(o, c) < -EPS);
        if self.bland {
            candidates.min()
        } else {
            candidates.min_by(|&a, &b| self.at(o, a).total_cmp(&self.at(o, b)).then(a.cmp(&b)))
        }
    }

    fn leaving(&self, pc: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows {
            let a = self.at(r, pc);
            if a > EPS {
                let ratio = self.rhs(r) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        let tie = (ratio - bratio).abs() <= EPS * (1.0 + bratio.abs());
                        if ratio < bratio && !tie || tie && self.basis[r] < self.basis[br] {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
        }
        best.map(|(r, _)| r)
    }

    fn run(&mut self) -> Result<()> {
        loop {
            let Some(pc) = self.entering() else { return Ok(()) };
            let Some(pr) = self.leaving(pc) else {
                return Err(Error::numerical("linear program is unbounded"));
            };
            if self.rhs(pr).abs() <= EPS {
                self.degenerate_run += 1;
                if self.degenerate_run > 2 * self.cols {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(pr, pc);
            if self.pivots > MAX_PIVOTS {
                return Err(Error::NonConvergence(format!("simplex exceeded {MAX_PIVOTS} pivots")));
            }
        }
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width();
        let o = self.obj_row();
        for c in 0..w {
            self.t[o * w + c] = if c < cost.len() { cost[c] } else { 0.0 };
        }
        for r in 0..self.rows {
            let cb = cost.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for c in 0..w {
                    self.t[o * w + c] -= cb * self.t[r * w + c];
                }
            }
        }
    }
}

/// Solve `problem` to optimality.
pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.n_vars();

    let mut maps = Vec::with_capacity(n);
    let mut n_struct = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for &(l, u) in &problem.bounds {
        let m = if l.is_finite() {
            let col = n_struct;
            n_struct += 1;
            if u.is_finite() {
                bound_rows.push((col, u - l));
            }
            Map::Shift { col, offset: l }
        } else if u.is_finite() {
            let col = n_struct;
            n_struct += 1;
            Map::Flip { col, offset: u }
        } else {
            let (pos, neg) = (n_struct, n_struct + 1);
            n_struct += 2;
            Map::Split { pos, neg }
        };
        maps.push(m);
    }

    // Rows over the nonnegative columns, in (coeffs, relation, rhs) form.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &problem.constraints {
        let mut a = vec![0.0; n_struct];
        let mut rhs = c.rhs;
        for (k, &coef) in c.coeffs.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            match maps[k] {
                Map::Shift { col, offset } => {
                    a[col] += coef;
                    rhs -= coef * offset;
                }
                Map::Flip { col, offset } => {
                    a[col] -= coef;
                    rhs -= coef * offset;
                }
                Map::Split { pos, neg } => {
                    a[pos] += coef;
                    a[neg] -= coef;
                }
            }
        }
        rows.push((a, c.relation, rhs));
    }
    for &(col, width) in &bound_rows {
        let mut a = vec![0.0; n_struct];
        a[col] = 1.0;
        rows.push((a, Relation::Le, width));
    }
    let mut cost = vec![0.0; n_struct];
    for (k, &c) in problem.objective.iter().enumerate() {
        match maps[k] {
            Map::Shift { col, .. } => cost[col] += c,
            Map::Flip { col, .. } => cost[col] -= c,
            Map::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    // Normalize to nonnegative right-hand sides.
    for (a, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n_struct + n_slack + n_art;
    let w = cols + 1;
    let mut tab = Tableau {
        rows: m,
        cols,
        t: vec![0.0; (m + 1) * w],
        basis: vec![0; m],
        barred: vec![false; cols],
        pivots: 0,
        degenerate_run: 0,
        bland: false,
    };
    let (mut s, mut art) = (n_struct, n_struct + n_slack);
    for (r, (a, rel, rhs)) in rows.iter().enumerate() {
        tab.t[r * w..r * w + n_struct].copy_from_slice(a);
        tab.t[r * w + cols] = *rhs;
        match rel {
            Relation::Le => {
                tab.t[r * w + s] = 1.0;
                tab.basis[r] = s;
                s += 1;
            }
            Relation::Ge => {
                tab.t[r * w + s] = -1.0;
                s += 1;
                tab.t[r * w + art] = 1.0;
                tab.basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                tab.t[r * w + art] = 1.0;
                tab.basis[r] = art;
                art += 1;
            }
        }
    }
    let art_start = n_struct + n_slack;

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[art_start..].iter_mut().for_each(|v| *v = 1.0);
        tab.set_objective(&phase1);
        tab.run()?;
        let infeas = -tab.rhs(tab.obj_row());
        if infeas > 1e-7 * (1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max)) {
            return Err(Error::numerical(format!("linear program is infeasible (phase-1 residual {infeas:.3e})")));
        }
        // Drive remaining artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art_start {
                if let Some(c) = (0..art_start).find(|&c| tab.at(r, c).abs() > EPS) {
                    tab.pivot(r, c);
                }
            }
        }
        for c in art_start..cols {
            tab.barred[c] = true;
        }
        tab.degenerate_run = 0;
    }
    let mut full_cost = cost.clone();
    full_cost.resize(cols, 0.0);
    tab.set_objective(&full_cost);
    tab.run()?;

    let mut z = vec![0.0; cols];
    for r in 0..m {
        z[tab.basis[r]] = tab.rhs(r);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            Map::Shift { col, offset } => offset + z[col],
            Map::Flip { col, offset } => offset - z[col],
            Map::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    let objective = problem.objective_at(&x);
    Ok(LpSolution { x, objective, pivots: tab.pivots, bland_engaged: tab.bland })
}
