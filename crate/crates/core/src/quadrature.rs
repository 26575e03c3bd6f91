//! Adaptive Simpson quadrature.

/// Default recursion depth cap.
pub const MAX_DEPTH: u32 = 40;

/// Minimum subdivision depth before the error test may accept an interval.
const MIN_DEPTH: u32 = 2;

/// Integrates `f` over `[a, b]` (either orientation) with a relative
/// tolerance on the magnitude of the integral.
///
/// The acceptance test is the classical `|S₂ − S| ≤ 15 ε` with the
/// Richardson-corrected value returned. `ε` is `rel_tol` times a coarse
/// estimate of `∫|f|`, so the tolerance tracks the scale of the integral
/// rather than an absolute floor.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, rel_tol: f64, max_depth: u32) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let m = 0.5 * (lo + hi);
    let (fa, fm, fb) = (f(lo), f(m), f(hi));
    let whole = simpson(lo, hi, fa, fm, fb);

    // Scale from a 9-point composite rule on |f|.
    let mut scale = 0.0;
    let n = 8;
    let h = (hi - lo) / n as f64;
    for k in 0..=n {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        scale += w * f(lo + k as f64 * h).abs();
    }
    scale *= h / 3.0;
    let eps = rel_tol * scale.max(f64::MIN_POSITIVE);

    sign * recurse(f, lo, hi, fa, fm, fb, whole, eps, 0, max_depth)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32, max_depth: u32) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth >= max_depth || (depth >= MIN_DEPTH && delta.abs() <= 15.0 * eps) {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * eps, depth + 1, max_depth)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * eps, depth + 1, max_depth)
}
