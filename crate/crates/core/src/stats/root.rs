//! Bracketed root finding for strictly monotone functions.

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;

/// A bracketing interval for a sign-changing function.
#[derive(Debug, Clone, Copy)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    /// Absolute tolerance on the root location.
    pub tol_abs: f64,
}

impl RootBracket {
    /// Bracket with the default tolerance of 1e-9.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        Self::with_tolerance(lo, hi, 1e-9)
    }

    pub fn with_tolerance(lo: f64, hi: f64, tol_abs: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Validation(format!(
                "root bracket requires lo < hi, got [{lo}, {hi}]"
            )));
        }
        if !(tol_abs > 0.0) {
            return Err(Error::Validation(format!(
                "root bracket tolerance must be positive, got {tol_abs}"
            )));
        }
        Ok(Self { lo, hi, tol_abs })
    }
}

/// Solves `f(x) = 0` for a function that is strictly monotone on the bracket.
///
/// Bisection with secant acceleration: each round takes a secant step when it
/// falls strictly inside the current bracket, then an unconditional bisection
/// step, so the bracket at least halves per round. The bracket invariant
/// `f(lo) * f(hi) <= 0` is maintained throughout, so the result is within
/// `tol_abs` of the true root.
pub fn solve_monotone_root<F: Fn(f64) -> f64>(f: F, bracket: &RootBracket) -> Result<f64> {
    let mut lo = bracket.lo;
    let mut hi = bracket.hi;
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);

    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }

    let update = |x: f64,
                  fx: f64,
                  lo: &mut f64,
                  f_lo: &mut f64,
                  hi: &mut f64,
                  f_hi: &mut f64| {
        if fx.signum() == f_lo.signum() {
            *lo = x;
            *f_lo = fx;
        } else {
            *hi = x;
            *f_hi = fx;
        }
    };

    let mut resolved = false;
    for _ in 0..MAX_ITER {
        if hi - lo <= bracket.tol_abs {
            resolved = true;
            break;
        }
        if let Some(s) = secant_point(lo, f_lo, hi, f_hi) {
            if s > lo && s < hi {
                let fs = f(s);
                if fs == 0.0 {
                    return Ok(s);
                }
                if fs.is_nan() {
                    return Err(Error::Numerical(format!("root objective returned NaN at {s}")));
                }
                update(s, fs, &mut lo, &mut f_lo, &mut hi, &mut f_hi);
                if hi - lo <= bracket.tol_abs {
                    resolved = true;
                    break;
                }
            }
        }
        let m = 0.5 * (lo + hi);
        if !(m > lo && m < hi) {
            // Bracket exhausted at floating-point resolution.
            resolved = true;
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.is_nan() {
            return Err(Error::Numerical(format!("root objective returned NaN at {m}")));
        }
        update(m, fm, &mut lo, &mut f_lo, &mut hi, &mut f_hi);
    }
    if !resolved {
        return Err(Error::NoConvergence { max_iter: MAX_ITER });
    }
    // Final secant interpolation inside the converged bracket.
    let x = secant_point(lo, f_lo, hi, f_hi).unwrap_or(0.5 * (lo + hi));
    Ok(x.clamp(lo, hi))
}

fn secant_point(a: f64, fa: f64, b: f64, fb: f64) -> Option<f64> {
    let denom = fb - fa;
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    let x = a - fa * (b - a) / denom;
    x.is_finite().then_some(x)
}
