//! Horseshoe shrinkage prior: the augmented latent-scale state used by the
//! sampler and offline checks of the prior concentration/thickness conditions.
//!
//! The prior on each off-diagonal entry is
//!
//! ```text
//! ω_ij | λ_ij, τ ~ N(0, λ_ij² τ²),   λ_ij ~ C⁺(0, 1),   τ ~ C⁺(0, 1)
//! ```
//!
//! and the half-Cauchy scales are written as inverse-gamma mixtures
//!
//! ```text
//! λ_ij² | v_ij ~ IG(1/2, 1/v_ij),   τ² | κ ~ IG(1/2, 1/κ),   v_ij, κ ~ IG(1/2, 1)
//! ```

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::quadrature::adaptive_simpson;

/// Lower clamp applied to every latent scale after it is drawn.
pub const SCALE_FLOOR: f64 = 1e-12;
/// Upper clamp applied to every latent scale after it is drawn.
pub const SCALE_CEILING: f64 = 1e12;

/// Default absolute tolerance for the marginal-density quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-8;

const QUAD_MAX_DEPTH: u32 = 60;
const QUAD_MAX_EVALS: usize = 2_000_000;

#[inline]
pub(crate) fn clamp_scale(x: f64) -> f64 {
    if x.is_nan() {
        SCALE_CEILING
    } else {
        x.clamp(SCALE_FLOOR, SCALE_CEILING)
    }
}

/// Latent scales of the augmented horseshoe prior.
///
/// `lambda2[(j, i)]` and `v[(j, i)]` belong to ω_ji; diagonals are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeState {
    pub lambda2: DenseMatrix,
    pub v: DenseMatrix,
    pub tau2: f64,
    pub kappa: f64,
}

impl HorseshoeState {
    /// λ² = v = τ² = κ = 1.
    pub fn initial(p: usize) -> Self {
        let mut ones = DenseMatrix::zeros(p, p);
        for j in 0..p {
            for i in 0..p {
                if i != j {
                    ones[(j, i)] = 1.0;
                }
            }
        }
        Self { lambda2: ones.clone(), v: ones, tau2: 1.0, kappa: 1.0 }
    }

    pub fn new(lambda2: DenseMatrix, v: DenseMatrix, tau2: f64, kappa: f64) -> Result<Self> {
        let s = Self { lambda2, v, tau2, kappa };
        s.validate()?;
        Ok(s)
    }

    pub fn p(&self) -> usize {
        self.lambda2.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        for (name, m) in [("lambda2", &self.lambda2), ("v", &self.v)] {
            if m.rows() != p || m.cols() != p {
                return Err(Error::DimensionMismatch {
                    expected: format!("{p}x{p} {name}"),
                    found: format!("{}x{}", m.rows(), m.cols()),
                });
            }
            for j in 0..p {
                for i in 0..p {
                    let x = m[(j, i)];
                    let ok = if i == j { x == 0.0 } else { x.is_finite() && x > 0.0 };
                    if !ok {
                        return Err(Error::invalid(format!("{name}[({j}, {i})] = {x} is not admissible")));
                    }
                }
            }
        }
        for (name, x) in [("tau2", self.tau2), ("kappa", self.kappa)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::invalid(format!("{name} = {x} must be finite and positive")));
            }
        }
        Ok(())
    }

    /// True when every scale lies inside `[SCALE_FLOOR, SCALE_CEILING]`.
    pub fn within_clamp(&self) -> bool {
        let inside = |x: f64| (SCALE_FLOOR..=SCALE_CEILING).contains(&x);
        let p = self.p();
        inside(self.tau2)
            && inside(self.kappa)
            && (0..p).all(|j| {
                (0..p).all(|i| i == j || (inside(self.lambda2[(j, i)]) && inside(self.v[(j, i)])))
            })
    }
}

#[inline]
fn normal_pdf(x: f64, sd: f64) -> f64 {
    let z = x / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// Breakpoints in θ = atan(λ) that bracket the region where the integrand
/// changes, namely λ ≈ |x| / alpha.
fn breakpoints(x: f64, alpha: f64) -> Vec<f64> {
    let centre = x.abs() / alpha;
    let mut pts = vec![0.0, FRAC_PI_2];
    // Octave-spaced panels from just below the peak out to λ = 1e6 keep the
    // 1/λ shoulder of the integrand well resolved when x/alpha is tiny.
    let mut k = -10;
    loop {
        let lam = centre * 2f64.powi(k);
        if lam > 1e6 || k > 200 {
            break;
        }
        let t = lam.atan();
        if t > 0.0 && t < FRAC_PI_2 {
            pts.push(t);
        }
        k += 1;
    }
    pts.push((1.0f64).atan());
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn integrate_theta<F: Fn(f64) -> f64>(g: F, pts: &[f64], tol: f64) -> Result<f64> {
    let per = tol / (pts.len() as f64);
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += adaptive_simpson(&g, w[0], w[1], per, QUAD_MAX_DEPTH, QUAD_MAX_EVALS)?;
    }
    Ok(total)
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::invalid(format!("quadrature tolerance must lie in (0, 1e-4], got {tol}")));
    }
    Ok(())
}

/// Marginal density of an entry under the horseshoe with global scale `alpha`:
/// `∫₀^∞ N(x | 0, alpha² λ²) (2/π)(1 + λ²)⁻¹ dλ`.
///
/// Computed with λ = tan θ, which turns the half-Cauchy weight into the
/// constant 2/π on (0, π/2). Infinite at `x = 0`.
pub fn horseshoe_marginal_density(x: f64, alpha: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be finite and positive, got {alpha}")));
    }
    if !x.is_finite() {
        return Err(Error::invalid("density argument must be finite"));
    }
    if x == 0.0 {
        return Ok(f64::INFINITY);
    }
    let g = |theta: f64| {
        let t = theta.tan();
        if !(t > 0.0) || !t.is_finite() {
            return 0.0;
        }
        (2.0 / PI) * normal_pdf(x, alpha * t)
    };
    integrate_theta(g, &breakpoints(x, alpha), tol)
}

/// Prior mass outside `[-a, a]`, computed directly from the mixture:
/// `∫ P(|N(0, alpha² λ²)| > a) (2/π)(1 + λ²)⁻¹ dλ`.
pub fn horseshoe_mass_outside(a: f64, alpha: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(a.is_finite() && a > 0.0 && alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid("interval half-width and alpha must be finite and positive"));
    }
    let g = |theta: f64| {
        let t = theta.tan();
        if !(t > 0.0) {
            return 0.0;
        }
        if !t.is_finite() {
            return 2.0 / PI;
        }
        (2.0 / PI) * libm::erfc(a / (SQRT_2 * alpha * t))
    };
    let m = integrate_theta(g, &breakpoints(a, alpha), tol)?;
    Ok(m.clamp(0.0, 1.0))
}

/// Inputs to the prior concentration and thickness checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConditionSpec {
    pub a_n: f64,
    pub e_n: f64,
    pub p: usize,
    pub u: f64,
    pub c: f64,
    pub alpha: f64,
}

impl PriorConditionSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.a_n) && pos(self.e_n) && pos(self.u) && pos(self.alpha)) {
            return Err(Error::invalid("a_n, E_n, u and alpha must be finite and positive"));
        }
        if self.a_n >= self.e_n {
            return Err(Error::invalid(format!("a_n ({}) must be below E_n ({})", self.a_n, self.e_n)));
        }
        if !(self.c.is_finite() && self.c > 1.0) {
            return Err(Error::invalid(format!("c must exceed 1, got {}", self.c)));
        }
        if self.p == 0 {
            return Err(Error::invalid("p must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationCheck {
    pub mass_outside: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessCheck {
    pub inf_density: f64,
    pub passes: bool,
}

/// Concentration: mass outside `[-a_n, a_n]` must not exceed `p^-(1+u)`.
pub fn check_concentration(spec: &PriorConditionSpec) -> Result<ConcentrationCheck> {
    spec.validate()?;
    let mass_outside = horseshoe_mass_outside(spec.a_n, spec.alpha, DEFAULT_QUAD_TOL)?;
    let bound = (spec.p as f64).powf(-(1.0 + spec.u));
    Ok(ConcentrationCheck { mass_outside, passes: mass_outside <= bound })
}

/// Thickness: the density on `[-E_n, E_n]` must stay at or above `p^-c`.
///
/// The density is even and decreasing in |x|, so the grid minimum sits at the
/// endpoint; the grid is still scanned so that the reported value is a true
/// minimum of evaluated points.
pub fn check_thickness(spec: &PriorConditionSpec) -> Result<ThicknessCheck> {
    spec.validate()?;
    const GRID: usize = 64;
    let mut inf_density = f64::INFINITY;
    for k in 1..=GRID {
        let x = spec.e_n * k as f64 / GRID as f64;
        inf_density = inf_density.min(horseshoe_marginal_density(x, spec.alpha, DEFAULT_QUAD_TOL)?);
    }
    let bound = (spec.p as f64).powf(-spec.c);
    Ok(ThicknessCheck { inf_density, passes: inf_density >= bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-8;

    #[test]
    fn density_is_even_and_decreasing() {
        for x in [0.1, 1.0, 5.0] {
            let a = horseshoe_marginal_density(x, 1.0, TOL).unwrap();
            let b = horseshoe_marginal_density(-x, 1.0, TOL).unwrap();
            assert!((a - b).abs() <= 2.0 * TOL);
        }
        let grid = [0.01, 0.05, 0.1, 0.3, 0.7, 1.0, 2.0, 4.0, 10.0, 50.0];
        let vals: Vec<f64> =
            grid.iter().map(|&x| horseshoe_marginal_density(x, 1.0, TOL).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[0] >= w[1] - 2.0 * TOL);
        }
        assert!(horseshoe_marginal_density(0.0, 1.0, TOL).unwrap().is_infinite());
    }

    #[test]
    fn density_scale_equivariance() {
        for &alpha in &[0.1, 0.5, 3.0] {
            for &x in &[0.05, 0.4, 2.0] {
                let lhs = horseshoe_marginal_density(x, alpha, TOL).unwrap();
                let rhs = horseshoe_marginal_density(x / alpha, 1.0, TOL).unwrap() / alpha;
                assert!((lhs - rhs).abs() <= 2.0 * TOL * rhs.max(1.0), "{alpha} {x}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(horseshoe_marginal_density(1.0, 1.0, 1e-3).is_err());
        assert!(horseshoe_marginal_density(1.0, 1.0, 0.0).is_err());
        assert!(horseshoe_marginal_density(1.0, -1.0, TOL).is_err());
    }

    #[test]
    fn concentration_endpoints() {
        let mut spec = PriorConditionSpec { a_n: 1e-3, e_n: 1.0, p: 100, u: 0.5, c: 2.0, alpha: 1e6 };
        let r = check_concentration(&spec).unwrap();
        assert!(!r.passes);
        assert!((0.0..=1.0).contains(&r.mass_outside));

        spec.alpha = spec.a_n * spec.a_n / (spec.p as f64).powi(2);
        let r = check_concentration(&spec).unwrap();
        assert!(r.passes, "mass outside {}", r.mass_outside);
        assert!((0.0..=1.0).contains(&r.mass_outside));
    }

    #[test]
    fn concentration_mass_decreases_with_alpha() {
        let base = PriorConditionSpec { a_n: 0.01, e_n: 1.0, p: 100, u: 0.5, c: 2.0, alpha: 1.0 };
        let masses: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&alpha| check_concentration(&PriorConditionSpec { alpha, ..base }).unwrap().mass_outside)
            .collect();
        assert!(masses[0] > masses[1] && masses[1] > masses[2], "{masses:?}");
    }

    #[test]
    fn thickness_is_density_at_endpoint() {
        let spec = PriorConditionSpec { a_n: 0.01, e_n: 2.0, p: 100, u: 0.5, c: 2.0, alpha: 1.0 };
        let r = check_thickness(&spec).unwrap();
        let f = horseshoe_marginal_density(2.0, 1.0, TOL).unwrap();
        assert!((r.inf_density - f).abs() <= 2.0 * TOL);
        assert!(r.passes);

        let tiny = PriorConditionSpec { alpha: 1e-12, ..spec };
        assert!(!check_thickness(&tiny).unwrap().passes);
    }

    #[test]
    fn spec_validation() {
        let good = PriorConditionSpec { a_n: 0.01, e_n: 2.0, p: 100, u: 0.5, c: 2.0, alpha: 1.0 };
        assert!(good.validate().is_ok());
        assert!(PriorConditionSpec { a_n: 3.0, ..good }.validate().is_err());
        assert!(PriorConditionSpec { c: 1.0, ..good }.validate().is_err());
        assert!(PriorConditionSpec { u: 0.0, ..good }.validate().is_err());
    }

    #[test]
    fn initial_state_is_valid() {
        let s = HorseshoeState::initial(4);
        s.validate().unwrap();
        assert!(s.within_clamp());
        assert_eq!(s.lambda2[(2, 2)], 0.0);
    }
}
