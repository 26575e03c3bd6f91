//! Comparison functions (classes K, K∞, P and KL) with grid certification.
//!
//! Class membership is an analytic property. Here it is certified on finite
//! grids only: a [`ClassReport`] without violations means the function passed
//! on every tested point. Unboundedness of K∞ functions in particular is a
//! growth heuristic at the top of the grid, not a proof.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;
use crate::root::{solve_increasing, RootOptions};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ScalarFn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Absolute tolerance on the image used by inversion.
pub const TOL_INV: f64 = 1e-12;

/// Number of points in the default certification grid.
pub const DEFAULT_GRID_POINTS: usize = 256;

/// Lower end of the default certification grid.
pub const DEFAULT_GRID_LO: f64 = 1e-9;

/// Claimed comparison class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassTag {
    K,
    KInfinity,
    P,
    Generic,
}

impl ClassTag {
    pub fn name(self) -> &'static str {
        match self {
            ClassTag::K => "K",
            ClassTag::KInfinity => "K_infinity",
            ClassTag::P => "P",
            ClassTag::Generic => "generic",
        }
    }
}

/// A property that a grid check can witness as violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    /// `f(0) = 0`.
    Zero,
    /// Strictly increasing between consecutive grid points.
    Increasing,
    /// `f(r) > 0` for every grid point `r > 0`.
    Positive,
    /// Growth at the top of the grid (K∞ heuristic).
    Unbounded,
    /// Finite and non-negative values.
    FiniteNonNegative,
    /// Non-increasing in the time argument (KL functions).
    NonIncreasing,
    /// Strict decay over the tested horizon (KL functions).
    Decay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub property: Property,
    /// Grid points witnessing the violation (capped at 16).
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub tag: ClassTag,
    pub grid_len: usize,
    pub violations: Vec<Violation>,
}

impl ClassReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, property: Property, at: f64) {
        match self.violations.iter_mut().find(|v| v.property == property) {
            Some(v) if v.points.len() < 16 => v.points.push(at),
            Some(_) => {}
            None => self.violations.push(Violation { property, points: alloc::vec![at] }),
        }
    }
}

/// A scalar function `[0, ∞) → [0, ∞)` with a claimed class.
#[derive(Clone)]
pub struct ComparisonFunction {
    f: ScalarFn,
    tag: ClassTag,
    domain_hint: f64,
    label: String,
}

impl fmt::Debug for ComparisonFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComparisonFunction")
            .field("label", &self.label)
            .field("tag", &self.tag)
            .field("domain_hint", &self.domain_hint)
            .finish()
    }
}

impl ComparisonFunction {
    pub fn new<F>(label: impl Into<String>, tag: ClassTag, domain_hint: f64, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ComparisonFunction { f: Arc::new(f), tag, domain_hint, label: label.into() }
    }

    pub fn identity() -> Self {
        Self::new("id", ClassTag::KInfinity, 1e6, |s| s)
    }

    /// `s ↦ a·s`.
    pub fn linear(a: f64) -> Self {
        let tag = if a > 0.0 { ClassTag::KInfinity } else { ClassTag::Generic };
        Self::new(format!("linear:{a}"), tag, 1e6, move |s| a * s)
    }

    /// `s ↦ c·s^p`.
    pub fn power(c: f64, p: f64) -> Self {
        let tag = if c > 0.0 && p > 0.0 { ClassTag::KInfinity } else { ClassTag::Generic };
        let f = move |s: f64| {
            if s == 0.0 {
                0.0
            } else if p == 2.0 {
                c * s * s
            } else {
                c * math::powf(s, p)
            }
        };
        Self::new(format!("power:{c},{p}"), tag, 1e6, f)
    }

    /// `s ↦ c·(e^{k s} − 1)`.
    pub fn exp_minus_one(c: f64, k: f64) -> Self {
        let tag = if c > 0.0 && k > 0.0 { ClassTag::KInfinity } else { ClassTag::Generic };
        let hint = if k > 0.0 { 700.0 / k } else { 1e6 };
        Self::new(format!("exp:{c},{k}"), tag, hint, move |s| c * libm::expm1(k * s))
    }

    /// Monotone piecewise-linear interpolation through `(s, value)` knots,
    /// extended linearly past the last knot with the final slope.
    ///
    /// Knots must have strictly increasing `s ≥ 0` and non-decreasing values.
    /// The tag is K∞ when the table starts at `(0, 0)` and is strictly
    /// increasing, otherwise generic.
    pub fn table(label: impl Into<String>, knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Argument("a table needs at least two knots".to_string()));
        }
        if knots[0].0 < 0.0 {
            return Err(Error::Domain(format!("table abscissa {} is negative", knots[0].0)));
        }
        let mut strict = true;
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Argument(format!(
                    "table abscissae must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::ClassViolation(format!(
                    "table values decrease between s = {} and s = {}",
                    w[0].0, w[1].0
                )));
            }
            strict &= w[1].1 > w[0].1;
        }
        let tag = if strict && knots[0] == (0.0, 0.0) { ClassTag::KInfinity } else { ClassTag::Generic };
        let hint = knots[knots.len() - 1].0;
        let knots: Arc<[(f64, f64)]> = knots.into();
        let f = move |s: f64| {
            let n = knots.len();
            let idx = match knots.binary_search_by(|k| k.0.total_cmp(&s)) {
                Ok(i) => return knots[i].1,
                Err(i) => i,
            };
            let (a, b) = if idx == 0 {
                (knots[0], knots[1])
            } else if idx >= n {
                (knots[n - 2], knots[n - 1])
            } else {
                (knots[idx - 1], knots[idx])
            };
            a.1 + (b.1 - a.1) * (s - a.0) / (b.0 - a.0)
        };
        Ok(Self::new(label, tag, hint, f))
    }

    /// Pointwise maximum; class K∞ when both inputs are.
    pub fn max_of(a: &Self, b: &Self) -> Self {
        let (fa, fb) = (a.f.clone(), b.f.clone());
        let tag = join_tag(a.tag, b.tag);
        Self::new(format!("max{{{}, {}}}", a.label, b.label), tag, a.domain_hint.min(b.domain_hint), move |s| {
            fa(s).max(fb(s))
        })
    }

    pub fn tag(&self) -> ClassTag {
        self.tag
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_hint(&self) -> f64 {
        self.domain_hint
    }

    pub fn with_tag(mut self, tag: ClassTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_domain_hint(mut self, hint: f64) -> Self {
        self.domain_hint = hint;
        self
    }

    /// Unchecked evaluation for hot loops.
    #[inline]
    pub fn apply(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("{} evaluated at negative input {s}", self.label)));
        }
        let v = (self.f)(s);
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("{}({s}) = {v} is not a non-negative number", self.label)));
        }
        Ok(v)
    }

    /// Solves `f(s) = y` on `bracket` by bracketed root finding.
    ///
    /// The result satisfies `|f(s) − y| ≤ TOL_INV` whenever the floating
    /// point resolution of `f` near `s` allows it; iteration continues until
    /// the bracket collapses, so the result is as accurate as `f` is.
    pub fn inverse(&self, y: f64, bracket: (f64, f64)) -> Result<f64> {
        if bracket.0 < 0.0 {
            return Err(Error::Domain(format!("bracket starts at negative {}", bracket.0)));
        }
        let f = &self.f;
        solve_increasing(|s| f(s), y, bracket.0, bracket.1, RootOptions::default())
    }

    /// Inverse with an automatically grown bracket `[0, 2^k]`.
    pub fn inverse_auto(&self, y: f64) -> Result<f64> {
        let f0 = (self.f)(0.0);
        if y <= f0 {
            return if y >= f0 - TOL_INV { Ok(0.0) } else { Err(Error::Bracketing { target: y, lo: f0, hi: f0 }) };
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..2100 {
            let v = (self.f)(hi);
            if v >= y {
                return self.inverse(y, (lo, hi));
            }
            if !v.is_finite() {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                break;
            }
        }
        Err(Error::Bracketing { target: y, lo: f0, hi: (self.f)(lo) })
    }

    /// The inverse as a comparison function; evaluates to NaN where
    /// inversion fails.
    pub fn inverse_function(&self) -> Self {
        let me = self.clone();
        let hint = self.apply(self.domain_hint);
        Self::new(format!("inv({})", self.label), self.tag, hint, move |y| me.inverse_auto(y).unwrap_or(f64::NAN))
    }

    /// `s ↦ self(inner(s))`.
    pub fn compose(&self, inner: &Self) -> Self {
        let (fo, fi) = (self.f.clone(), inner.f.clone());
        Self::new(
            format!("{}∘{}", self.label, inner.label),
            join_tag(self.tag, inner.tag),
            inner.domain_hint,
            move |s| fo(fi(s)),
        )
    }

    /// 256 log-spaced points over `[1e-9, domain_hint]`.
    pub fn default_grid(&self) -> Vec<f64> {
        math::log_space(DEFAULT_GRID_LO, self.domain_hint.max(2.0 * DEFAULT_GRID_LO), DEFAULT_GRID_POINTS)
    }

    /// Checks the properties of `tag` on a sorted non-negative grid.
    ///
    /// `f(0)` is always evaluated for the zero condition, whether or not the
    /// grid contains 0.
    pub fn verify_class(&self, tag: ClassTag, grid: &[f64]) -> Result<ClassReport> {
        if grid.is_empty() {
            return Err(Error::Argument("empty certification grid".to_string()));
        }
        if grid[0] < 0.0 || grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Argument("grid must be sorted and non-negative".to_string()));
        }
        let mut report = ClassReport { tag, grid_len: grid.len(), violations: Vec::new() };
        let values: Vec<f64> = grid.iter().map(|&s| (self.f)(s)).collect();
        for (&s, &v) in grid.iter().zip(&values) {
            if !(v.is_finite() && v >= 0.0) {
                report.push(Property::FiniteNonNegative, s);
            }
        }
        if tag == ClassTag::Generic {
            return Ok(report);
        }
        let f0 = (self.f)(0.0);
        if f0.abs() > 1e-300 || !f0.is_finite() {
            report.push(Property::Zero, 0.0);
        }
        match tag {
            ClassTag::K | ClassTag::KInfinity => {
                for k in 1..grid.len() {
                    if grid[k] > grid[k - 1] && !(values[k] > values[k - 1]) {
                        report.push(Property::Increasing, grid[k]);
                    }
                }
                if grid[0] > 0.0 && !(values[0] > f0) {
                    report.push(Property::Increasing, grid[0]);
                }
                if tag == ClassTag::KInfinity {
                    let top = grid[grid.len() - 1];
                    if top > 0.0 {
                        let lower = (self.f)(top / 10.0);
                        let upper = values[values.len() - 1];
                        if !(upper >= (1.0 + 1e-3) * lower) {
                            report.push(Property::Unbounded, top);
                        }
                    }
                }
            }
            ClassTag::P => {
                for (&s, &v) in grid.iter().zip(&values) {
                    if s > 0.0 && !(v > 0.0) {
                        report.push(Property::Positive, s);
                    }
                }
            }
            ClassTag::Generic => {}
        }
        Ok(report)
    }
}

fn join_tag(a: ClassTag, b: ClassTag) -> ClassTag {
    use ClassTag::*;
    match (a, b) {
        (KInfinity, KInfinity) => KInfinity,
        (K | KInfinity, K | KInfinity) => K,
        _ => Generic,
    }
}

/// A class-KL function `(r, s) ↦ β(r, s)`.
#[derive(Clone)]
pub struct KLFunction {
    f: ScalarFn2,
    label: String,
}

impl fmt::Debug for KLFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KLFunction").field("label", &self.label).finish()
    }
}

impl KLFunction {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        KLFunction { f: Arc::new(f), label: label.into() }
    }

    #[inline]
    pub fn eval(&self, r: f64, s: f64) -> f64 {
        (self.f)(r, s)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Grid check: class K in `r` for each tested `s`; non-increasing in `s`
    /// and strictly smaller at the last `s` than at the first, for each
    /// tested `r > 0`.
    pub fn verify(&self, r_grid: &[f64], s_grid: &[f64]) -> Result<ClassReport> {
        if r_grid.is_empty() || s_grid.is_empty() {
            return Err(Error::Argument("empty certification grid".to_string()));
        }
        let mut report =
            ClassReport { tag: ClassTag::Generic, grid_len: r_grid.len() * s_grid.len(), violations: Vec::new() };
        for &s in s_grid {
            if self.eval(0.0, s).abs() > 1e-300 {
                report.push(Property::Zero, s);
            }
            let mut prev = self.eval(0.0, s);
            for &r in r_grid.iter().filter(|&&r| r > 0.0) {
                let v = self.eval(r, s);
                if !(v.is_finite() && v >= 0.0) {
                    report.push(Property::FiniteNonNegative, r);
                }
                // Values that underflow to zero carry no ordering information.
                if !(v > prev) && !(v == 0.0 && prev == 0.0) {
                    report.push(Property::Increasing, r);
                }
                prev = v;
            }
        }
        for &r in r_grid.iter().filter(|&&r| r > 0.0) {
            let first = self.eval(r, s_grid[0]);
            let mut prev = first;
            for &s in &s_grid[1..] {
                let v = self.eval(r, s);
                if v > prev * (1.0 + 1e-12) {
                    report.push(Property::NonIncreasing, s);
                }
                prev = v;
            }
            if s_grid.len() > 1 && !(prev < first) {
                report.push(Property::Decay, r);
            }
        }
        Ok(report)
    }
}

/// A sign-indefinite scalar rate, e.g. the flow rate `ρ` of a candidate
/// ISS-Lyapunov function (negative-valued for unstable flows).
#[derive(Clone)]
pub struct Rate {
    f: ScalarFn,
    label: String,
}

impl fmt::Debug for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rate").field("label", &self.label).finish()
    }
}

impl Rate {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Rate { f: Arc::new(f), label: label.into() }
    }

    /// `s ↦ a·s`.
    pub fn linear(a: f64) -> Self {
        Rate::new(format!("linear:{a}"), move |s| a * s)
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn negated(&self) -> Self {
        let f = self.f.clone();
        Rate { f: Arc::new(move |s| -f(s)), label: format!("-({})", self.label) }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let f = self.f.clone();
        Rate { f: Arc::new(move |s| c * f(s)), label: format!("{c}·({})", self.label) }
    }
}

impl From<ComparisonFunction> for Rate {
    fn from(c: ComparisonFunction) -> Self {
        Rate { f: c.f, label: c.label }
    }
}

impl From<&ComparisonFunction> for Rate {
    fn from(c: &ComparisonFunction) -> Self {
        Rate { f: c.f.clone(), label: c.label.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{E, PI};

    fn chi_heat() -> ComparisonFunction {
        ComparisonFunction::power(4.0 * math::exp(5.0), 2.0)
    }

    #[test]
    fn eval_class_k_zero() {
        assert_eq!(ComparisonFunction::linear(2.0).eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn eval_heat_gain_at_input_level() {
        // 4e⁵·0.01
        let v = chi_heat().eval(0.1).unwrap();
        assert!((v - 5.936_526_364_103_8).abs() < 1e-9, "{v}");
    }

    #[test]
    fn eval_rotation_gain_at_one() {
        let c = 8.0 * math::exp(6.0 * PI);
        let v = ComparisonFunction::power(c, 2.0).eval(1.0).unwrap();
        assert_eq!(v, c);
    }

    #[test]
    fn eval_rejects_negative_input() {
        let err = ComparisonFunction::linear(1.0).eval(-1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn inverse_linear() {
        let s = ComparisonFunction::linear(2.0).inverse(1.0, (0.0, 10.0)).unwrap();
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverse_square() {
        let s = ComparisonFunction::power(1.0, 2.0).inverse(4.0, (0.0, 10.0)).unwrap();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_round_trip_of_heat_gain() {
        let s = chi_heat().inverse(5.936_526_36, (0.0, 1.0)).unwrap();
        assert!((s - 0.1).abs() < 1e-9, "{s}");
    }

    #[test]
    fn inverse_outside_image_is_bracketing_error() {
        let err = ComparisonFunction::linear(1.0).inverse(20.0, (0.0, 10.0)).unwrap_err();
        assert!(matches!(err, Error::Bracketing { .. }));
    }

    #[test]
    fn inverse_detects_decreasing_samples() {
        let f = ComparisonFunction::new("bad", ClassTag::K, 10.0, |s| 5.0 - s);
        let err = f.inverse(2.0, (0.0, 5.0)).unwrap_err();
        assert!(matches!(err, Error::ClassViolation(_)));
    }

    #[test]
    fn inverse_auto_grows_bracket() {
        let f = ComparisonFunction::power(1.0, 3.0);
        let s = f.inverse_auto(1e9).unwrap();
        assert!((s - 1e3).abs() < 1e-9);
        assert!(ComparisonFunction::table("t", alloc::vec![(0.0, 0.0), (1.0, 1.0)]).unwrap().inverse_auto(5.0).is_ok());
    }

    #[test]
    fn compose_identity_and_evaluation() {
        let g = ComparisonFunction::power(3.0, 1.5);
        let idg = ComparisonFunction::identity().compose(&g);
        for s in [0.0, 0.3, 2.0, 17.0] {
            assert_eq!(idg.apply(s), g.apply(s));
        }
        let h = ComparisonFunction::power(1.0, 2.0).compose(&ComparisonFunction::linear(2.0));
        assert_eq!(h.apply(3.0), 36.0);
        assert_eq!(h.tag(), ClassTag::KInfinity);
    }

    #[test]
    fn compose_inverse_with_max_gives_heat_gamma() {
        // α₁(s) = s/e, γ = α₁⁻¹ ∘ max{α₃, χ}
        let alpha1 = ComparisonFunction::linear(1.0 / E);
        let alpha3 = ComparisonFunction::power(4.0 * math::exp(4.0), 2.0);
        let gate = ComparisonFunction::max_of(&alpha3, &chi_heat());
        let gamma = alpha1.inverse_function().compose(&gate);
        let expected = 0.04 * math::exp(6.0);
        assert!((gamma.apply(0.1) - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn verify_identity_k_infinity_on_wide_grid() {
        let grid = math::log_space(1e-6, 1e6, 256);
        let r = ComparisonFunction::identity().verify_class(ClassTag::KInfinity, &grid).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn verify_shifted_linear_fails_zero_condition() {
        let f = ComparisonFunction::new("1+s", ClassTag::K, 10.0, |s| 1.0 + s);
        let r = f.verify_class(ClassTag::K, &[0.0, 1.0, 2.0]).unwrap();
        assert!(!r.passed());
        assert_eq!(r.violations[0].property, Property::Zero);
    }

    #[test]
    fn verify_kappa_derivative_is_positive_definite() {
        let f = ComparisonFunction::new("k'", ClassTag::P, 10.0, |s| 0.5 * (s * s + 2.0 * s) / ((1.0 + s) * (1.0 + s)));
        let r = f.verify_class(ClassTag::P, &math::lin_space(0.0, 10.0, 101)).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn verify_bounded_function_fails_unboundedness() {
        let f = ComparisonFunction::new("s/(1+s)", ClassTag::KInfinity, 1e6, |s| s / (1.0 + s));
        let r = f.verify_class(ClassTag::KInfinity, &f.default_grid()).unwrap();
        assert!(r.violations.iter().any(|v| v.property == Property::Unbounded));
        // It is still a fine class-K function.
        assert!(f.verify_class(ClassTag::K, &f.default_grid()).unwrap().passed());
    }

    #[test]
    fn verify_empty_grid_is_argument_error() {
        let err = ComparisonFunction::identity().verify_class(ClassTag::K, &[]).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let t = ComparisonFunction::table("t", alloc::vec![(0.0, 0.0), (1.0, 2.0), (2.0, 3.0)]).unwrap();
        assert_eq!(t.tag(), ClassTag::KInfinity);
        assert_eq!(t.apply(0.5), 1.0);
        assert_eq!(t.apply(1.5), 2.5);
        assert_eq!(t.apply(4.0), 5.0);
        assert!(ComparisonFunction::table("bad", alloc::vec![(0.0, 1.0), (1.0, 0.5)]).is_err());
    }

    #[test]
    fn kl_verification_of_exponential_decay() {
        let b = KLFunction::new("r e^-s", |r, s| r * math::exp(-s));
        let r = b.verify(&math::lin_space(0.0, 5.0, 11), &math::lin_space(0.0, 10.0, 11)).unwrap();
        assert!(r.passed(), "{r:?}");
        let bad = KLFunction::new("r", |r, _| r);
        assert!(!bad.verify(&[1.0], &[0.0, 1.0]).unwrap().passed());
    }
}
