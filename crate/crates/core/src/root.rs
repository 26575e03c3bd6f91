//! Bracketed root finding for monotone scalar functions.
//!
//! The solver is an Illinois-modified regula falsi with a bisection
//! safeguard: every iterate stays inside the bracket, so it converges for any
//! continuous non-decreasing function, and it is superlinear on smooth ones.

use alloc::format;

use crate::error::{Error, Result};

/// Stopping rules for [`solve_increasing`].
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Accept an iterate as soon as `|f(x) - y|` falls to this value.
    /// Zero means "iterate until the bracket collapses".
    pub image_tol: f64,
    /// Stop once the bracket is narrower than this, relative to its magnitude.
    pub x_rel_tol: f64,
    /// Hard cap on function evaluations inside the loop.
    pub max_iter: usize,
    /// Slack allowed when comparing interior samples against the end values
    /// to detect non-monotone functions.
    pub monotone_slack: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { image_tol: 0.0, x_rel_tol: 4.0 * f64::EPSILON, max_iter: 200, monotone_slack: 1e-12 }
    }
}

/// Solves `f(x) = y` on `[lo, hi]` for a non-decreasing `f`.
///
/// Returns the iterate with the smallest residual once a stopping rule
/// fires. Errors when `y` is outside `[f(lo), f(hi)]` (beyond
/// `monotone_slack`) or when a sample contradicts monotonicity.
pub fn solve_increasing<F>(f: F, y: f64, lo: f64, hi: f64, opts: RootOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(Error::Argument(format!("empty bracket [{lo}, {hi}]")));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::Domain(format!("non-finite bracket values f({lo}) = {f_lo}, f({hi}) = {f_hi}")));
    }
    let slack = opts.monotone_slack * (1.0 + f_lo.abs().max(f_hi.abs()));
    if f_lo > f_hi + slack {
        return Err(Error::ClassViolation(format!(
            "function decreases across bracket: f({lo}) = {f_lo} > f({hi}) = {f_hi}"
        )));
    }
    if y < f_lo - slack || y > f_hi + slack {
        return Err(Error::Bracketing { target: y, lo: f_lo, hi: f_hi });
    }
    if y <= f_lo {
        return Ok(lo);
    }
    if y >= f_hi {
        return Ok(hi);
    }

    let (mut a, mut b) = (lo, hi);
    let (mut ga, mut gb) = (f_lo - y, f_hi - y);
    let mut best = if -ga <= gb { (a, -ga) } else { (b, gb) };
    // Illinois bookkeeping: which side was retained last (-1 left, 1 right).
    let mut side = 0i8;
    let mut width_before = b - a;

    for it in 0..opts.max_iter {
        let mut x =
            if it % 3 == 2 && (b - a) > 0.5 * width_before { 0.5 * (a + b) } else { a - ga * (b - a) / (gb - ga) };
        if it % 3 == 2 {
            width_before = b - a;
        }
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
            if !(x > a && x < b) {
                break;
            }
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::Domain(format!("non-finite value f({x}) = {fx}")));
        }
        if fx < f_lo - slack || fx > f_hi + slack {
            return Err(Error::ClassViolation(format!("f({x}) = {fx} leaves [f({lo}), f({hi})] = [{f_lo}, {f_hi}]")));
        }
        let gx = fx - y;
        if gx.abs() < best.1 {
            best = (x, gx.abs());
        }
        if gx == 0.0 || gx.abs() <= opts.image_tol {
            return Ok(x);
        }
        if gx < 0.0 {
            a = x;
            ga = gx;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            gb = gx;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if b - a <= opts.x_rel_tol * scale {
            break;
        }
    }
    Ok(best.0)
}
