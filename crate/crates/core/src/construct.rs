//! Dwell-time conditions and the constructions of a time-varying
//! ISS-Lyapunov function from a candidate one.
//!
//! Two regimes are covered:
//!
//! - stable flows, unstable jumps (`ρ > 0`): impulses at least `θ` apart and
//!   `∫_a^{α(a)} ds/ρ(s) ≤ θ − δ`. The constructed function is
//!   `V = max{v₁, v₂}` with `v₁` a time-discounted transform of the
//!   candidate and `v₂ = κ(V_cand)`.
//! - unstable flows, stable jumps (`−ρ > 0`): impulses at most `θ` apart and
//!   `∫_{α(a)}^a ds/(−ρ(s)) ≥ θ − δ`. The constructed function discounts the
//!   candidate by the elapsed fraction of each segment.
//!
//! Both formulas are extended to the initial segment `[t₀, t₁)`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::comparison::{ClassTag, ComparisonFunction, Rate};
use crate::error::{Error, Result};
use crate::lyapunov::{CandidateLyapunov, Certificates, TimeVaryingLyapunov};
use crate::math;
use crate::system::{ImpulseSequence, Segment};
use crate::transform::{build_transform, MonotoneTransform, DEFAULT_QUAD_TOL};

/// Absolute tolerance of the dwell-time comparison.
pub const DWELL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Stable flows, unstable jumps.
    Sfuj,
    /// Unstable flows, stable jumps.
    Ufsj,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Sfuj => "sfuj",
            Regime::Ufsj => "ufsj",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sfuj" => Some(Regime::Sfuj),
            "ufsj" => Some(Regime::Ufsj),
            _ => None,
        }
    }
}

/// Parameters of a dwell-time condition.
#[derive(Clone, Debug)]
pub struct DwellParams {
    pub rho: Rate,
    pub alpha: ComparisonFunction,
    pub theta: f64,
    pub delta: f64,
    pub a_grid: Vec<f64>,
}

impl DwellParams {
    /// Requires `θ > δ > 0`; uses [`default_a_grid`].
    pub fn new(rho: Rate, alpha: ComparisonFunction, theta: f64, delta: f64) -> Result<Self> {
        if !(theta > delta && delta > 0.0 && theta.is_finite()) {
            return Err(Error::Argument(format!("need theta > delta > 0, got theta = {theta}, delta = {delta}")));
        }
        Ok(DwellParams { rho, alpha, theta, delta, a_grid: default_a_grid() })
    }

    pub fn from_candidate(c: &CandidateLyapunov, theta: f64, delta: f64) -> Result<Self> {
        Self::new(c.rho.clone(), c.alpha.clone(), theta, delta)
    }

    pub fn with_grid(mut self, a_grid: Vec<f64>) -> Result<Self> {
        if a_grid.is_empty() || a_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::Argument("dwell grid must be non-empty and positive".into()));
        }
        self.a_grid = a_grid;
        Ok(self)
    }
}

/// 121 log-spaced points over `[1e-6, 1e6]`.
pub fn default_a_grid() -> Vec<f64> {
    math::log_space(1e-6, 1e6, 121)
}

/// Outcome of a dwell-time check.
#[derive(Debug, Clone, PartialEq)]
pub struct DwellReport {
    pub regime: Regime,
    /// `(a, integral)` for every grid point.
    pub integrals: Vec<(f64, f64)>,
    /// Largest integral (SFUJ) or smallest integral (UFSJ) over the grid.
    pub extreme: f64,
    /// `θ − δ`.
    pub bound: f64,
    /// `bound − extreme` (SFUJ) or `extreme − bound` (UFSJ).
    pub margin: f64,
    pub passed: bool,
}

/// `∫_a^{α(a)} ds/ρ(s) ≤ θ − δ` on every grid point.
pub fn check_dwell_sfuj(p: &DwellParams) -> Result<DwellReport> {
    let t = build_transform(p.rho.clone(), DEFAULT_QUAD_TOL)?;
    let integrals: Vec<(f64, f64)> = p.a_grid.iter().map(|&a| (a, t.integral(a, p.alpha.apply(a)))).collect();
    let extreme = integrals.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    let bound = p.theta - p.delta;
    let margin = bound - extreme;
    Ok(DwellReport { regime: Regime::Sfuj, integrals, extreme, bound, margin, passed: margin >= -DWELL_TOL })
}

/// `∫_{α(a)}^a ds/(−ρ(s)) ≥ θ − δ` on every grid point.
pub fn check_dwell_ufsj(p: &DwellParams) -> Result<DwellReport> {
    let t = build_transform(p.rho.negated(), DEFAULT_QUAD_TOL)?;
    let mut integrals = Vec::with_capacity(p.a_grid.len());
    for &a in &p.a_grid {
        let aa = p.alpha.apply(a);
        if !(aa < a) {
            return Err(Error::Orientation { a, alpha_a: aa });
        }
        integrals.push((a, t.integral(aa, a)));
    }
    let extreme = integrals.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
    let bound = p.theta - p.delta;
    let margin = extreme - bound;
    Ok(DwellReport { regime: Regime::Ufsj, integrals, extreme, bound, margin, passed: margin >= -DWELL_TOL })
}

pub fn check_dwell(regime: Regime, p: &DwellParams) -> Result<DwellReport> {
    match regime {
        Regime::Sfuj => check_dwell_sfuj(p),
        Regime::Ufsj => check_dwell_ufsj(p),
    }
}

/// `κ(s) = c·s²/(1+s)`: `C¹`, class K∞, with `κ′(s) = c(s²+2s)/(1+s)²`
/// positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub c: f64,
}

impl Kappa {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Construction(format!("kappa coefficient must be positive, got {c}")));
        }
        Ok(Kappa { c })
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.c * s * s / (1.0 + s)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.c * (s * s + 2.0 * s) / ((1.0 + s) * (1.0 + s))
    }

    /// Positive root of `c·s² − v·s − v = 0`.
    pub fn inverse(&self, v: f64) -> f64 {
        if !(v > 0.0) {
            return 0.0;
        }
        (v + math::sqrt(v * v + 4.0 * self.c * v)) / (2.0 * self.c)
    }

    pub fn function(&self) -> ComparisonFunction {
        let k = *self;
        ComparisonFunction::new(format!("kappa[c={}]", self.c), ClassTag::KInfinity, 1e6, move |s| k.eval(s))
    }

    pub fn derivative_function(&self) -> ComparisonFunction {
        let k = *self;
        ComparisonFunction::new(format!("kappa'[c={}]", self.c), ClassTag::P, 1e6, move |s| k.derivative(s))
    }
}

/// `c = 0.99·inf_grid min{α⁻¹(s), s}·(1+s)/s²`, so that `κ ≤ min{α⁻¹, id}`
/// on the grid. Both properties are re-checked on the grid.
pub fn default_kappa(alpha: &ComparisonFunction, grid: &[f64]) -> Result<Kappa> {
    if grid.is_empty() {
        return Err(Error::Argument("kappa grid is empty".into()));
    }
    let mut inv = Vec::with_capacity(grid.len());
    let mut inf = f64::INFINITY;
    for &s in grid {
        if !(s > 0.0) {
            continue;
        }
        let ai = alpha.inverse_auto(s)?;
        inf = inf.min(ai.min(s) * (1.0 + s) / (s * s));
        inv.push((s, ai));
    }
    let kappa = Kappa::new(0.99 * inf).map_err(|_| {
        Error::Construction(format!("kappa coefficient degenerates (inf = {inf}); alpha inverse too small"))
    })?;
    for &(s, ai) in &inv {
        if kappa.eval(s) > ai.min(s) {
            return Err(Error::Construction(format!("kappa({s}) exceeds min(alpha^-1, id)")));
        }
    }
    let report = kappa.derivative_function().verify_class(ClassTag::P, grid)?;
    if !report.passed() {
        return Err(Error::Construction("kappa' fails the class-P check".into()));
    }
    Ok(kappa)
}

/// `φ(v) = min{(δ/θ)·ρ(v), κ′(κ⁻¹(v))·ρ(κ⁻¹(v))}`, checked for class P.
pub fn build_phi(c: &CandidateLyapunov, p: &DwellParams, kappa: &Kappa) -> Result<ComparisonFunction> {
    let (rho, k, ratio) = (c.rho.clone(), *kappa, p.delta / p.theta);
    let phi =
        ComparisonFunction::new(format!("min({ratio}·rho, kappa'·rho∘kappa^-1)"), ClassTag::P, 1e6, move |v| {
            let w = k.inverse(v);
            (ratio * rho.eval(v)).min(k.derivative(w) * rho.eval(w))
        });
    check_class_p(&phi)?;
    Ok(phi)
}

fn check_class_p(f: &ComparisonFunction) -> Result<()> {
    let grid = f.default_grid();
    let mut bad = f64::NAN;
    let ok = f.apply(0.0) == 0.0
        && grid.iter().all(|&s| {
            let v = f.apply(s);
            if !(v > 0.0) {
                bad = s;
            }
            v > 0.0
        });
    if ok {
        Ok(())
    } else {
        Err(Error::Construction(format!("{} is not positive definite (first failure at {bad})", f.label())))
    }
}

/// What was built and from which parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub regime: Regime,
    pub theta: f64,
    pub delta: f64,
    pub kappa_c: Option<f64>,
    pub dwell: DwellReport,
    /// Lower limit of the transform (`−∞` when the integral diverges at 0).
    pub lower_limit: f64,
    pub notes: Vec<String>,
}

type Branches = Arc<dyn Fn(&Segment, f64, &[f64]) -> (f64, f64) + Send + Sync>;

/// A constructed time-varying ISS-Lyapunov function.
#[derive(Clone)]
pub struct ConstructionResult {
    pub lyapunov: TimeVaryingLyapunov,
    pub provenance: Provenance,
    pub transform: MonotoneTransform,
    branches: Branches,
}

impl fmt::Debug for ConstructionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstructionResult")
            .field("lyapunov", &self.lyapunov)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl ConstructionResult {
    pub fn certificates(&self) -> Certificates {
        self.lyapunov.certificates()
    }

    /// `(v₁, v₂)` at `(t, x)`; for UFSJ `v₂` is 0 and `v₁` is the value.
    pub fn branches(&self, t: f64, x: &[f64]) -> (f64, f64) {
        (self.branches)(&self.lyapunov.impulses().segment_at(t), t, x)
    }
}

fn inverse_clamped(t: &MonotoneTransform, y: f64) -> f64 {
    let m = t.lower_limit();
    if !(y > m) {
        return 0.0;
    }
    t.inverse(y).unwrap_or(f64::NAN)
}

/// `V = max{v₁, v₂}` with
/// `v₁ = F⁻¹(max{F(V_cand) − (tᵢ₊₁−t)/(tᵢ₊₁−tᵢ)·(θ−δ), F(0)})` and
/// `v₂ = κ(V_cand)`, `F(q) = ∫₁^q ds/ρ(s)`.
///
/// Certificates: `α₁ = κ∘ψ₁`, `α₂ = ψ₂`, `χ = α∘η`, `α₃ = max{ψ₃, χ}`,
/// `φ` from [`build_phi`]. `κ` defaults to [`default_kappa`] on `p.a_grid`.
pub fn construct_sfuj(
    c: &CandidateLyapunov,
    p: &DwellParams,
    impulses: &ImpulseSequence,
    kappa: Option<Kappa>,
) -> Result<ConstructionResult> {
    let dwell = check_dwell_sfuj(p)?;
    if !dwell.passed {
        return Err(Error::Precondition(format!(
            "dwell condition fails: max integral {} > theta - delta = {}",
            dwell.extreme, dwell.bound
        )));
    }
    let gap = impulses.min_gap(f64::INFINITY);
    if gap < p.theta * (1.0 - 1e-12) {
        return Err(Error::Sequence(format!("smallest impulse gap {gap} is below theta = {}", p.theta)));
    }
    let kappa = match kappa {
        Some(k) => k,
        None => default_kappa(&p.alpha, &p.a_grid)?,
    };
    let t = build_transform(p.rho.clone(), DEFAULT_QUAD_TOL)?;
    let m = t.lower_limit();
    let discount = p.theta - p.delta;

    let (tf, vc) = (t.clone(), c.value_fn());
    let branches: Branches = Arc::new(move |seg: &Segment, time: f64, x: &[f64]| {
        let v = vc(x);
        let mut arg = tf.value(v) - seg.remaining_fraction(time) * discount;
        if m.is_finite() {
            arg = arg.max(m);
        }
        (inverse_clamped(&tf, arg), kappa.eval(v))
    });

    let chi = c.alpha.compose(&c.eta).with_label(format!("alpha∘eta[{}∘{}]", c.alpha.label(), c.eta.label()));
    let certs = Certificates {
        alpha1: kappa.function().compose(&c.psi1),
        alpha2: c.psi2.clone(),
        alpha3: ComparisonFunction::max_of(&c.psi3, &chi),
        phi: build_phi(c, p, &kappa)?,
        chi,
    };
    let b = branches.clone();
    let lyapunov = TimeVaryingLyapunov::new(
        format!("sfuj[{}; theta={}, delta={}]", c.label(), p.theta, p.delta),
        impulses.clone(),
        certs,
        move |seg, time, x| {
            let (v1, v2) = b(seg, time, x);
            v1.max(v2)
        },
    );
    let mut notes = alloc::vec![String::from("formula applied on the initial segment [t0, t1) with i = 0")];
    if m.is_finite() {
        notes.push(format!("finite lower limit {m}: v1 clamp active, v2 keeps V positive"));
    }
    Ok(ConstructionResult {
        lyapunov,
        provenance: Provenance {
            regime: Regime::Sfuj,
            theta: p.theta,
            delta: p.delta,
            kappa_c: Some(kappa.c),
            dwell,
            lower_limit: m,
            notes,
        },
        transform: t,
        branches,
    })
}

/// `V = F₋⁻¹(F₋(V_cand) − (t−tᵢ)/(tᵢ₊₁−tᵢ)·(θ+δ))`, `F₋(q) = ∫₁^q ds/(−ρ(s))`.
///
/// Jump non-increase needs `∫_{α(a)}^a ds/(−ρ) ≥ θ + δ`, which is stronger
/// than the dwell condition `≥ θ − δ`; both are required here.
///
/// Certificates: `α₁(s) = F₋⁻¹(F₋(ψ₁(s)) − (θ+δ))`, `α₂ = ψ₂`, `χ = η`,
/// `α₃ = max{ψ₃, η}`, `φ = (δ/θ)·(−ρ)`. Arguments below a finite lower
/// limit of `F₋` are clamped to it (value 0).
pub fn construct_ufsj(
    c: &CandidateLyapunov,
    p: &DwellParams,
    impulses: &ImpulseSequence,
) -> Result<ConstructionResult> {
    let dwell = check_dwell_ufsj(p)?;
    if !dwell.passed {
        return Err(Error::Precondition(format!(
            "dwell condition fails: min integral {} < theta - delta = {}",
            dwell.extreme, dwell.bound
        )));
    }
    let growth = p.theta + p.delta;
    if dwell.extreme < growth - DWELL_TOL {
        return Err(Error::Precondition(format!(
            "jump decrease needs min integral >= theta + delta = {growth}, got {}",
            dwell.extreme
        )));
    }
    let gap = impulses.max_gap(f64::INFINITY);
    if gap > p.theta * (1.0 + 1e-12) {
        return Err(Error::Sequence(format!("largest impulse gap {gap} exceeds theta = {}", p.theta)));
    }
    let t = build_transform(p.rho.negated(), DEFAULT_QUAD_TOL)?;
    let m = t.lower_limit();

    let (tf, vc) = (t.clone(), c.value_fn());
    let branches: Branches = Arc::new(move |seg: &Segment, time: f64, x: &[f64]| {
        let arg = tf.value(vc(x)) - seg.elapsed_fraction(time) * growth;
        (inverse_clamped(&tf, arg), 0.0)
    });

    let (ta, psi1) = (t.clone(), c.psi1.clone());
    let alpha1 = ComparisonFunction::new(
        format!("F-^-1(F-({}) - {growth})", c.psi1.label()),
        if m.is_finite() { ClassTag::Generic } else { ClassTag::KInfinity },
        c.psi1.domain_hint(),
        move |s| inverse_clamped(&ta, ta.value(psi1.apply(s)) - growth),
    );
    let (rho, ratio) = (p.rho.clone(), p.delta / p.theta);
    let phi = ComparisonFunction::new(format!("{ratio}·(-rho)"), ClassTag::P, 1e6, move |v| -ratio * rho.eval(v));
    check_class_p(&phi)?;
    let certs = Certificates {
        alpha1,
        alpha2: c.psi2.clone(),
        chi: c.eta.clone(),
        phi,
        alpha3: ComparisonFunction::max_of(&c.psi3, &c.eta),
    };
    let b = branches.clone();
    let lyapunov = TimeVaryingLyapunov::new(
        format!("ufsj[{}; theta={}, delta={}]", c.label(), p.theta, p.delta),
        impulses.clone(),
        certs,
        move |seg, time, x| b(seg, time, x).0,
    );
    let mut notes = alloc::vec![
        String::from("formula applied on the initial segment [t0, t1) with i = 0"),
        String::from(
            "certificates derived for this regime: chi = eta, alpha3 = max(psi3, eta), phi = (delta/theta)(-rho)"
        ),
        format!("jump decrease checked against theta + delta = {growth}"),
    ];
    if m.is_finite() {
        notes.push(format!("finite lower limit {m}: arguments clamped, alpha1 is not K-infinity"));
    }
    Ok(ConstructionResult {
        lyapunov,
        provenance: Provenance {
            regime: Regime::Ufsj,
            theta: p.theta,
            delta: p.delta,
            kappa_c: None,
            dwell,
            lower_limit: m,
            notes,
        },
        transform: t,
        branches,
    })
}
