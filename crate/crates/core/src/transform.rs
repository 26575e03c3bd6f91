//! The monotone integral transform `F(q) = ∫₁^q ds / rate(s)`, its inverse,
//! the relaxed KL bound `β̃` built from it, and the ISS gains `(β, γ)`.
//!
//! Integration runs in the log variable `w = ln s`, where the integrand
//! `e^w / rate(e^w)` is smooth and well scaled for every power-law rate.
//! Values are anchored to a table of 64 knots `q_j = 10^{0.375 j}`,
//! `j = −32..31`, so each evaluation integrates over at most one knot
//! interval. The same decomposition is used by the inverse, which keeps
//! `inverse(value(q))` consistent to far below the quadrature tolerance.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::comparison::{ComparisonFunction, KLFunction, Rate};
use crate::error::{Error, Result};
use crate::math;
use crate::quadrature::{adaptive_simpson, MAX_DEPTH};
use crate::root::{solve_increasing, RootOptions};

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Partial integrals below this value count as divergence of the lower limit.
pub const DIVERGENCE_FLOOR: f64 = -1e6;

const KNOT_COUNT: i32 = 64;
const KNOT_STEP_LOG10: f64 = 0.375;

/// `F(q) = ∫₁^q ds / rate(s)` for a rate that is positive on `(0, ∞)`.
#[derive(Clone)]
pub struct MonotoneTransform {
    inner: Arc<Inner>,
}

struct Inner {
    rate: Rate,
    quad_tol: f64,
    lower_limit: f64,
    knot_w: Vec<f64>,
    knot_f: Vec<f64>,
}

impl fmt::Debug for MonotoneTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneTransform")
            .field("rate", &self.inner.rate.label())
            .field("quad_tol", &self.inner.quad_tol)
            .field("lower_limit", &self.inner.lower_limit)
            .finish()
    }
}

impl MonotoneTransform {
    /// Builds the transform, its knot table and its lower limit.
    pub fn build(rate: Rate, quad_tol: f64) -> Result<Self> {
        if !(quad_tol > 0.0) {
            return Err(Error::Argument(format!("quad_tol must be positive, got {quad_tol}")));
        }
        let half = KNOT_COUNT / 2;
        let ln10 = math::ln(10.0);
        let knot_w: Vec<f64> = (-half..half).map(|j| j as f64 * KNOT_STEP_LOG10 * ln10).collect();

        // Positivity on knots and knot midpoints.
        for k in 0..knot_w.len() {
            let mut probes = alloc::vec![knot_w[k]];
            if k + 1 < knot_w.len() {
                probes.push(0.5 * (knot_w[k] + knot_w[k + 1]));
            }
            for w in probes {
                let s = math::exp(w);
                let v = rate.eval(s);
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::RateSign { at: s, value: v });
                }
            }
        }

        let anchor = half as usize;
        let mut knot_f = alloc::vec![0.0; knot_w.len()];
        {
            let integrand = integrand_of(&rate);
            for k in anchor + 1..knot_w.len() {
                knot_f[k] = knot_f[k - 1] + adaptive_simpson(&integrand, knot_w[k - 1], knot_w[k], quad_tol, MAX_DEPTH);
            }
            for k in (0..anchor).rev() {
                knot_f[k] = knot_f[k + 1] - adaptive_simpson(&integrand, knot_w[k], knot_w[k + 1], quad_tol, MAX_DEPTH);
            }
        }

        let mut t = MonotoneTransform {
            inner: Arc::new(Inner { rate, quad_tol, lower_limit: f64::NEG_INFINITY, knot_w, knot_f }),
        };
        let m = t.detect_lower_limit();
        Arc::get_mut(&mut t.inner).expect("fresh transform is uniquely owned").lower_limit = m;
        Ok(t)
    }

    pub fn rate(&self) -> &Rate {
        &self.inner.rate
    }

    pub fn quad_tol(&self) -> f64 {
        self.inner.quad_tol
    }

    /// `m = lim_{q→0⁺} F(q)`, possibly `−∞`.
    pub fn lower_limit(&self) -> f64 {
        self.inner.lower_limit
    }

    /// Knot table `(q_j, F(q_j))`.
    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.inner.knot_w.iter().zip(&self.inner.knot_f).map(|(&w, &f)| (math::exp(w), f))
    }

    /// `F(q)`; `F(0)` is the lower limit and negative `q` gives NaN.
    pub fn value(&self, q: f64) -> f64 {
        if q > 0.0 {
            if q == 1.0 {
                return 0.0;
            }
            self.value_log(math::ln(q))
        } else if q == 0.0 {
            self.inner.lower_limit
        } else {
            f64::NAN
        }
    }

    /// `F(e^w)`, integrated from the nearest knot at or below `w`.
    fn value_log(&self, w: f64) -> f64 {
        let inner = &*self.inner;
        let k = match inner.knot_w.binary_search_by(|x| x.total_cmp(&w)) {
            Ok(i) => return inner.knot_f[i],
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let integrand = integrand_of(&inner.rate);
        inner.knot_f[k] + adaptive_simpson(&integrand, inner.knot_w[k], w, inner.quad_tol, MAX_DEPTH)
    }

    /// `F(b) − F(a) = ∫_a^b ds / rate(s)` for `a, b > 0`, integrated directly
    /// rather than by differencing two table-anchored values.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if !(a > 0.0 && b > 0.0) {
            return f64::NAN;
        }
        let integrand = integrand_of(&self.inner.rate);
        adaptive_simpson(&integrand, math::ln(a), math::ln(b), self.inner.quad_tol, MAX_DEPTH)
    }

    /// Partial integrals at `ε = 10^{-k}`, `k = 1..12`, with a geometric tail
    /// estimate. Declares `−∞` when the partials fall below the divergence
    /// floor or their differences stop contracting.
    fn detect_lower_limit(&self) -> f64 {
        let partials: Vec<f64> = (1..=12).map(|k| self.value(math::powi(10.0, -k))).collect();
        if partials.iter().any(|&p| !(p > DIVERGENCE_FLOOR)) {
            return f64::NEG_INFINITY;
        }
        let diffs: Vec<f64> = partials.windows(2).map(|w| w[0] - w[1]).collect();
        let n = diffs.len();
        let last = diffs[n - 1];
        if last <= 0.0 {
            // Integrand vanishes near zero at this resolution.
            return partials[partials.len() - 1];
        }
        let r1 = diffs[n - 1] / diffs[n - 2];
        let r0 = diffs[n - 2] / diffs[n - 3];
        if !(r1 < 0.95) || (r1 - r0).abs() > 0.05 {
            return f64::NEG_INFINITY;
        }
        partials[partials.len() - 1] - last * r1 / (1.0 - r1)
    }

    /// `F⁻¹(y)` for `y` in the image `[m, sup F)`.
    ///
    /// Returns 0 for `y = m` (finite `m` or `−∞`). Values within
    /// `1e-12·(1+|m|)` below a finite `m` are treated as `m`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if y.is_nan() {
            return Err(Error::Domain("transform inverse of NaN".into()));
        }
        let m = self.inner.lower_limit;
        if y <= m {
            if y == m || y >= m - 1e-12 * (1.0 + m.abs()) {
                return Ok(0.0);
            }
            return Err(Error::Image { value: y, lower: m });
        }
        if y == 0.0 {
            return Ok(1.0);
        }
        let inner = &*self.inner;
        let n = inner.knot_f.len();
        let opts = RootOptions { x_rel_tol: 2.0 * f64::EPSILON, ..RootOptions::default() };
        let g = |w: f64| self.value_log(w);

        let (w_lo, w_hi) = if y < inner.knot_f[0] {
            let mut hi = inner.knot_w[0];
            let mut step = inner.knot_w[1] - inner.knot_w[0];
            loop {
                let lo = hi - step;
                if lo < -745.0 {
                    // Root below the smallest positive double.
                    return Ok(0.0);
                }
                if g(lo) <= y {
                    break (lo, hi);
                }
                hi = lo;
                step *= 2.0;
            }
        } else if y > inner.knot_f[n - 1] {
            let mut lo = inner.knot_w[n - 1];
            let mut step = inner.knot_w[1] - inner.knot_w[0];
            loop {
                let hi = lo + step;
                if hi > 709.0 {
                    return Err(Error::Image { value: y, lower: m });
                }
                if g(hi) >= y {
                    break (lo, hi);
                }
                lo = hi;
                step *= 2.0;
            }
        } else {
            let k = match inner.knot_f.binary_search_by(|x| x.total_cmp(&y)) {
                Ok(i) => return Ok(math::exp(inner.knot_w[i])),
                Err(i) => i - 1,
            };
            (inner.knot_w[k], inner.knot_w[k + 1])
        };
        let w = solve_increasing(g, y, w_lo, w_hi, opts)?;
        Ok(math::exp(w))
    }

    /// The relaxed KL bound `β̃(v₀, τ)`.
    ///
    /// With `m = −∞`: `F⁻¹(F(v₀) − τ)`. With finite `m`:
    /// `F⁻¹(F(v₀) − (F(v₀) − m)(1 − e^{−τ/(F(v₀) − m)}))`, which tends to
    /// `F⁻¹(m) = 0` as `τ → ∞`. `β̃(0, τ) = 0` and `β̃(v₀, 0) = v₀`.
    pub fn beta_tilde(&self, v0: f64, tau: f64) -> f64 {
        if !(v0 > 0.0) {
            return 0.0;
        }
        if !(tau > 0.0) {
            return v0;
        }
        let fv = self.value(v0);
        let m = self.inner.lower_limit;
        let arg = if m == f64::NEG_INFINITY {
            fv - tau
        } else {
            let gap = fv - m;
            if !(gap > 0.0) {
                return 0.0;
            }
            fv + gap * libm::expm1(-tau / gap)
        };
        self.inverse(arg).unwrap_or(f64::NAN)
    }

    pub fn beta_tilde_kl(&self) -> KLFunction {
        let t = self.clone();
        KLFunction::new(format!("beta_tilde[{}]", self.inner.rate.label()), move |v0, tau| t.beta_tilde(v0, tau))
    }
}

fn integrand_of(rate: &Rate) -> impl Fn(f64) -> f64 + '_ {
    move |w: f64| {
        let s = math::exp(w);
        s / rate.eval(s)
    }
}

/// Builds `F(q) = ∫₁^q ds / rate(s)`.
pub fn build_transform(rate: impl Into<Rate>, quad_tol: f64) -> Result<MonotoneTransform> {
    MonotoneTransform::build(rate.into(), quad_tol)
}

/// `F⁻¹(y)`.
pub fn transform_inverse(t: &MonotoneTransform, y: f64) -> Result<f64> {
    t.inverse(y)
}

/// `β̃` as a KL function.
pub fn build_beta_tilde(t: &MonotoneTransform) -> KLFunction {
    t.beta_tilde_kl()
}

/// ISS gains `β ∈ KL`, `γ ∈ K∞`.
#[derive(Clone, Debug)]
pub struct IssGains {
    pub beta: KLFunction,
    pub gamma: ComparisonFunction,
}

/// Assembles `β(r, s) = α₁⁻¹(β̃(α₂(r), s))` and `γ = α₁⁻¹ ∘ max{α₃, χ}`.
///
/// `α₁` is inverted numerically; a probe inversion at `α₂(1)` and at
/// `max{α₃, χ}(1)` surfaces bracketing failures up front.
pub fn build_iss_gains(
    alpha1: &ComparisonFunction,
    alpha2: &ComparisonFunction,
    alpha3: &ComparisonFunction,
    chi: &ComparisonFunction,
    beta_tilde: &KLFunction,
) -> Result<IssGains> {
    let gate = ComparisonFunction::max_of(alpha3, chi);
    alpha1.inverse_auto(alpha2.apply(1.0))?;
    alpha1.inverse_auto(gate.apply(1.0))?;

    let a1_inv = alpha1.inverse_function();
    let gamma = a1_inv.compose(&gate);
    let (a2, bt, a1i) = (alpha2.clone(), beta_tilde.clone(), a1_inv);
    let beta = KLFunction::new(format!("{}(beta_tilde({}(r), s))", a1i.label(), a2.label()), move |r, s| {
        if !(r > 0.0) {
            return 0.0;
        }
        a1i.apply(bt.eval(a2.apply(r), s))
    });
    Ok(IssGains { beta, gamma })
}
