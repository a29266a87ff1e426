//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

/// Integrate `f` over `[a, b]` to absolute error `tol`.
///
/// Fails when the recursion exceeds `max_depth` on some panel or more than
/// `max_evals` function evaluations are spent.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32, max_evals: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("quadrature tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut evals = 3usize;
    let mut budget = Budget { max_depth, max_evals };
    recurse(f, a, b, fa, fm, fb, whole, tol, 0, &mut evals, &mut budget)
}

struct Budget {
    max_depth: u32,
    max_evals: usize,
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
    budget: &mut Budget,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *evals += 2;
    if !(flm.is_finite() && frm.is_finite()) {
        return Err(Error::numerical(format!("non-finite integrand near {m}")));
    }
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // Panels narrower than the float spacing cannot be refined further.
    if delta.abs() <= 15.0 * tol || (m - a).abs() <= f64::EPSILON * m.abs().max(1.0) {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= budget.max_depth {
        return Err(Error::NonConvergence(format!(
            "adaptive Simpson exceeded depth {} on [{a}, {b}]",
            budget.max_depth
        )));
    }
    if *evals > budget.max_evals {
        return Err(Error::NonConvergence(format!(
            "adaptive Simpson exceeded {} evaluations",
            budget.max_evals
        )));
    }
    let l = recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1, evals, budget)?;
    let r = recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1, evals, budget)?;
    Ok(l + r)
}
