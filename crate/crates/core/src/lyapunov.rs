//! Candidate and time-varying ISS-Lyapunov functions, and sampled checks of
//! their inequalities along simulated trajectories.
//!
//! Every check records a margin `rhs − lhs` (non-negative when the
//! inequality holds exactly) and the tolerance it was judged against. Gates
//! compare against `‖u‖∞` of the whole input, never the instantaneous value.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::comparison::{ComparisonFunction, Rate};
use crate::error::{Error, Result};
use crate::system::{ImpulseSequence, Segment, Trajectory};
use crate::transform::IssGains;

pub type TimeVaryingFn = Arc<dyn Fn(&Segment, f64, &[f64]) -> f64 + Send + Sync>;
pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `V(t, x)` defined segment-wise on `[tᵢ, tᵢ₊₁)`, with its certificates.
#[derive(Clone)]
pub struct TimeVaryingLyapunov {
    value: TimeVaryingFn,
    impulses: ImpulseSequence,
    pub alpha1: ComparisonFunction,
    pub alpha2: ComparisonFunction,
    pub chi: ComparisonFunction,
    pub phi: ComparisonFunction,
    pub alpha3: ComparisonFunction,
    label: String,
}

impl fmt::Debug for TimeVaryingLyapunov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeVaryingLyapunov")
            .field("label", &self.label)
            .field("alpha1", &self.alpha1.label())
            .field("alpha2", &self.alpha2.label())
            .field("chi", &self.chi.label())
            .field("phi", &self.phi.label())
            .field("alpha3", &self.alpha3.label())
            .finish()
    }
}

/// The five certificate functions of a time-varying ISS-Lyapunov function.
#[derive(Clone, Debug)]
pub struct Certificates {
    pub alpha1: ComparisonFunction,
    pub alpha2: ComparisonFunction,
    pub chi: ComparisonFunction,
    pub phi: ComparisonFunction,
    pub alpha3: ComparisonFunction,
}

impl TimeVaryingLyapunov {
    /// `value(segment, t, x)` is called with the segment `[tᵢ, tᵢ₊₁)` that
    /// owns `t`; for left limits it receives the segment ending at `t`.
    pub fn new<F>(label: impl Into<String>, impulses: ImpulseSequence, certs: Certificates, value: F) -> Self
    where
        F: Fn(&Segment, f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        TimeVaryingLyapunov {
            value: Arc::new(value),
            impulses,
            alpha1: certs.alpha1,
            alpha2: certs.alpha2,
            chi: certs.chi,
            phi: certs.phi,
            alpha3: certs.alpha3,
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn impulses(&self) -> &ImpulseSequence {
        &self.impulses
    }

    pub fn certificates(&self) -> Certificates {
        Certificates {
            alpha1: self.alpha1.clone(),
            alpha2: self.alpha2.clone(),
            chi: self.chi.clone(),
            phi: self.phi.clone(),
            alpha3: self.alpha3.clone(),
        }
    }

    /// `V(t, x)`; at an impulse time the new segment is used.
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (self.value)(&self.impulses.segment_at(t), t, x)
    }

    /// `V(t⁻, x)`: the formula of the segment ending at `t` evaluated at `t`.
    /// Equals [`eval`](Self::eval) away from impulse times.
    pub fn eval_left(&self, t: f64, x: &[f64]) -> f64 {
        let i = self.impulses.index_at(t);
        let seg = if i > 0 && self.impulses.time(i) == Some(t) {
            self.impulses.segment(i - 1)
        } else {
            self.impulses.segment(i)
        };
        (self.value)(&seg, t, x)
    }

    pub fn eval_in(&self, seg: &Segment, t: f64, x: &[f64]) -> f64 {
        (self.value)(seg, t, x)
    }
}

/// A time-invariant candidate ISS-Lyapunov function with its rates.
#[derive(Clone)]
pub struct CandidateLyapunov {
    value: StateFn,
    pub psi1: ComparisonFunction,
    pub psi2: ComparisonFunction,
    pub eta: ComparisonFunction,
    /// Flow rate; negative values describe unstable flows.
    pub rho: Rate,
    pub alpha: ComparisonFunction,
    pub psi3: ComparisonFunction,
    label: String,
}

impl fmt::Debug for CandidateLyapunov {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateLyapunov")
            .field("label", &self.label)
            .field("rho", &self.rho.label())
            .field("alpha", &self.alpha.label())
            .finish()
    }
}

/// Rates and gains of a candidate function, in the order
/// `(ψ₁, ψ₂, η, ρ, α, ψ₃)`.
#[derive(Clone, Debug)]
pub struct CandidateRates {
    pub psi1: ComparisonFunction,
    pub psi2: ComparisonFunction,
    pub eta: ComparisonFunction,
    pub rho: Rate,
    pub alpha: ComparisonFunction,
    pub psi3: ComparisonFunction,
}

impl CandidateLyapunov {
    pub fn new<F>(label: impl Into<String>, rates: CandidateRates, value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        CandidateLyapunov {
            value: Arc::new(value),
            psi1: rates.psi1,
            psi2: rates.psi2,
            eta: rates.eta,
            rho: rates.rho,
            alpha: rates.alpha,
            psi3: rates.psi3,
            label: label.into(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value_fn(&self) -> StateFn {
        self.value.clone()
    }

    pub fn with_rho(mut self, rho: Rate) -> Self {
        self.rho = rho;
        self
    }
}

/// The inequality a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConditionId {
    /// `α₁(‖x‖) ≤ V(t, x)`.
    Def3LowerSandwich,
    /// `V(t, x) ≤ α₂(‖x‖)`.
    Def3UpperSandwich,
    /// `D⁺V ≤ −φ(V)` above the gate.
    Def3Flow,
    /// `V(tᵢ, g) ≤ V(tᵢ⁻, x)` above the gate.
    Def3Jump,
    /// `V(tᵢ, g) ≤ α₃(‖u‖∞)` below the gate.
    Def3BelowGate,
    Def2LowerSandwich,
    Def2UpperSandwich,
    /// `D⁺V ≤ −ρ(V)` above the gate.
    Def2Flow,
    /// `V(g) ≤ α(V(x))` above the gate.
    Def2Jump,
    /// `V(g) ≤ ψ₃(‖u‖∞)` below the gate.
    Def2BelowGate,
    /// `‖x(t)‖ ≤ β(‖x₀‖, t − t₀) + γ(‖u‖∞)`.
    IssEstimate,
}

impl ConditionId {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::Def3LowerSandwich => "def3.i.lower",
            ConditionId::Def3UpperSandwich => "def3.i.upper",
            ConditionId::Def3Flow => "def3.ii.flow",
            ConditionId::Def3Jump => "def3.ii.jump",
            ConditionId::Def3BelowGate => "def3.iii",
            ConditionId::Def2LowerSandwich => "def2.i.lower",
            ConditionId::Def2UpperSandwich => "def2.i.upper",
            ConditionId::Def2Flow => "def2.ii.flow",
            ConditionId::Def2Jump => "def2.ii.jump",
            ConditionId::Def2BelowGate => "def2.iii",
            ConditionId::IssEstimate => "def1.iss",
        }
    }

    pub fn is_jump(self) -> bool {
        matches!(
            self,
            ConditionId::Def3Jump | ConditionId::Def3BelowGate | ConditionId::Def2Jump | ConditionId::Def2BelowGate
        )
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sampled inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub condition: ConditionId,
    /// Index of the trajectory in the verified list.
    pub trajectory: usize,
    /// Sample time, or the impulse time for jump checks.
    pub t: f64,
    /// `rhs − lhs`; negative means the raw inequality is violated.
    pub margin: f64,
    /// The check passes iff `margin ≥ −tolerance`.
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(condition: ConditionId, trajectory: usize, t: f64, margin: f64, tolerance: f64) -> Self {
        Check { condition, trajectory, t, margin, tolerance, passed: margin >= -tolerance }
    }
}

/// All checks of one verification run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    /// Smallest margin over all checks (`+∞` when there are none).
    pub worst_margin: f64,
    pub passed: bool,
}

/// Per-condition tally of a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionSummary {
    pub condition: ConditionId,
    pub count: usize,
    pub failures: usize,
    pub worst_margin: f64,
    pub worst_t: f64,
}

impl VerificationReport {
    fn from_checks(checks: Vec<Check>) -> Self {
        let worst_margin = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        let passed = checks.iter().all(|c| c.passed);
        VerificationReport { checks, worst_margin, passed }
    }

    /// Concatenates reports, keeping their trajectory indices.
    pub fn merge(reports: impl IntoIterator<Item = VerificationReport>) -> Self {
        Self::from_checks(reports.into_iter().flat_map(|r| r.checks).collect())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> + '_ {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn of(&self, condition: ConditionId) -> impl Iterator<Item = &Check> + '_ {
        self.checks.iter().filter(move |c| c.condition == condition)
    }

    /// One summary per condition present, in `ConditionId` order.
    pub fn summary(&self) -> Vec<ConditionSummary> {
        let mut out: Vec<ConditionSummary> = Vec::new();
        for c in &self.checks {
            match out.iter_mut().find(|s| s.condition == c.condition) {
                Some(s) => {
                    s.count += 1;
                    s.failures += usize::from(!c.passed);
                    if c.margin < s.worst_margin {
                        s.worst_margin = c.margin;
                        s.worst_t = c.t;
                    }
                }
                None => out.push(ConditionSummary {
                    condition: c.condition,
                    count: 1,
                    failures: usize::from(!c.passed),
                    worst_margin: c.margin,
                    worst_t: c.t,
                }),
            }
        }
        out.sort_by_key(|s| s.condition);
        out
    }
}

/// Tolerances of the sampled checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Dini step; `None` uses each trajectory's simulation step.
    pub h: Option<f64>,
    /// Flow checks pass with slack `c_slack·h·(1 + |V|)`.
    pub c_slack: f64,
    /// Sandwich checks pass within `sandwich_rel·(1 + |V|)`.
    pub sandwich_rel: f64,
    /// Jump checks pass within `jump_rel·(1 + |rhs|)`.
    pub jump_rel: f64,
    /// Below-gate checks apply when `V⁻ < gate − gate_eps`.
    pub gate_eps: f64,
    /// ISS estimate passes within `iss_rel·(1 + bound)`.
    pub iss_rel: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { h: None, c_slack: 10.0, sandwich_rel: 1e-12, jump_rel: 1e-8, gate_eps: 1e-12, iss_rel: 1e-9 }
    }
}

impl VerifyOptions {
    pub fn with_step(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }
}

fn forward_dini<F>(f: F, traj: &Trajectory, seg: &Segment, t: f64, x: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&Segment, f64, &[f64]) -> f64,
{
    let end = seg.end.min(traj.horizon());
    if !(t + h < end) {
        return Err(Error::SegmentBoundary { t, h, end });
    }
    let v0 = f(seg, t, x);
    let mut best = f64::NEG_INFINITY;
    for hp in [h, 0.5 * h, 0.25 * h] {
        let xp = traj.advance(t, x, hp);
        best = best.max((f(seg, t + hp, &xp) - v0) / hp);
    }
    Ok(best)
}

/// Largest of three forward difference quotients (steps `h`, `h/2`, `h/4`)
/// of `t ↦ V(t, x(t))`, a conservative proxy for the upper Dini derivative.
///
/// Fails when `t + h` reaches the end of the flow segment containing `t` or
/// the end of the simulation.
pub fn dini_derivative(v: &TimeVaryingLyapunov, traj: &Trajectory, t: f64, h: f64) -> Result<f64> {
    let x = traj.state_at(t)?;
    let seg = v.impulses().segment_at(t);
    forward_dini(|s, t, x| v.eval_in(s, t, x), traj, &seg, t, &x, h)
}

/// Samples Definition 3 (i)–(iii) along every trajectory.
///
/// At each dense sample: the sandwich, and the flow decay when
/// `V ≥ χ(‖u‖∞)` and a forward step fits in the segment. At each impulse:
/// jump non-increase when `V(tᵢ⁻) ≥ χ(‖u‖∞)`, the `α₃` bound when
/// `V(tᵢ⁻) < χ(‖u‖∞) − gate_eps`.
pub fn verify_definition3(
    v: &TimeVaryingLyapunov,
    trajectories: &[Trajectory],
    opts: &VerifyOptions,
) -> VerificationReport {
    let mut checks = Vec::new();
    for (k, traj) in trajectories.iter().enumerate() {
        let sys = traj.system();
        let u_sup = traj.input().sup_norm();
        let gate = v.chi.apply(u_sup);
        let a3 = v.alpha3.apply(u_sup);
        let h = opts.h.unwrap_or(traj.step());
        let value = |s: &Segment, t: f64, x: &[f64]| v.eval_in(s, t, x);
        for piece in traj.pieces() {
            let seg = v.impulses().segment_at(piece.start);
            for (t, x) in piece.samples() {
                let vt = value(&seg, t, x);
                let n = sys.norm(x);
                let tol = opts.sandwich_rel * (1.0 + vt.abs());
                checks.push(Check::new(ConditionId::Def3LowerSandwich, k, t, vt - v.alpha1.apply(n), tol));
                checks.push(Check::new(ConditionId::Def3UpperSandwich, k, t, v.alpha2.apply(n) - vt, tol));
                if vt >= gate {
                    if let Ok(d) = forward_dini(value, traj, &seg, t, x, h) {
                        let slack = opts.c_slack * h * (1.0 + vt.abs());
                        checks.push(Check::new(ConditionId::Def3Flow, k, t, -v.phi.apply(vt) - d, slack));
                    }
                }
            }
        }
        for (j, l) in traj.left_limits().iter().enumerate() {
            let post = traj.pieces()[j + 1].state(0);
            let v_minus = v.eval_left(l.t, &l.state);
            let v_plus = v.eval(l.t, post);
            if v_minus >= gate {
                let tol = opts.jump_rel * (1.0 + v_minus.abs());
                checks.push(Check::new(ConditionId::Def3Jump, k, l.t, v_minus - v_plus, tol));
            } else if v_minus < gate - opts.gate_eps {
                let tol = opts.jump_rel * (1.0 + a3.abs());
                checks.push(Check::new(ConditionId::Def3BelowGate, k, l.t, a3 - v_plus, tol));
            }
        }
    }
    VerificationReport::from_checks(checks)
}

/// Samples Definition 2 (i)–(iii) for a candidate function.
///
/// `ρ` may be negative (unstable flows). The below-gate jump bound is gated
/// on the candidate value at the pre-jump state.
pub fn verify_definition2(
    c: &CandidateLyapunov,
    trajectories: &[Trajectory],
    opts: &VerifyOptions,
) -> VerificationReport {
    let mut checks = Vec::new();
    for (k, traj) in trajectories.iter().enumerate() {
        let sys = traj.system();
        let u_sup = traj.input().sup_norm();
        let gate = c.eta.apply(u_sup);
        let p3 = c.psi3.apply(u_sup);
        let h = opts.h.unwrap_or(traj.step());
        let value = |_: &Segment, _: f64, x: &[f64]| c.eval(x);
        for piece in traj.pieces() {
            let seg = traj.system().impulses().segment_at(piece.start);
            for (t, x) in piece.samples() {
                let vt = c.eval(x);
                let n = sys.norm(x);
                let tol = opts.sandwich_rel * (1.0 + vt.abs());
                checks.push(Check::new(ConditionId::Def2LowerSandwich, k, t, vt - c.psi1.apply(n), tol));
                checks.push(Check::new(ConditionId::Def2UpperSandwich, k, t, c.psi2.apply(n) - vt, tol));
                if vt >= gate {
                    if let Ok(d) = forward_dini(value, traj, &seg, t, x, h) {
                        let slack = opts.c_slack * h * (1.0 + vt.abs());
                        checks.push(Check::new(ConditionId::Def2Flow, k, t, -c.rho.eval(vt) - d, slack));
                    }
                }
            }
        }
        for (j, l) in traj.left_limits().iter().enumerate() {
            let post = traj.pieces()[j + 1].state(0);
            let v_minus = c.eval(&l.state);
            let v_plus = c.eval(post);
            if v_minus >= gate {
                let bound = c.alpha.apply(v_minus);
                let tol = opts.jump_rel * (1.0 + bound.abs());
                checks.push(Check::new(ConditionId::Def2Jump, k, l.t, bound - v_plus, tol));
            } else if v_minus < gate - opts.gate_eps {
                let tol = opts.jump_rel * (1.0 + p3.abs());
                checks.push(Check::new(ConditionId::Def2BelowGate, k, l.t, p3 - v_plus, tol));
            }
        }
    }
    VerificationReport::from_checks(checks)
}

/// Checks `‖x(t)‖ ≤ β(‖x₀‖, t − t₀) + γ(‖u‖∞)` at every dense sample.
pub fn check_iss_estimate(traj: &Trajectory, gains: &IssGains, opts: &VerifyOptions) -> VerificationReport {
    check_iss_estimates(core::slice::from_ref(traj), gains, opts)
}

/// [`check_iss_estimate`] over several trajectories.
pub fn check_iss_estimates(trajectories: &[Trajectory], gains: &IssGains, opts: &VerifyOptions) -> VerificationReport {
    let mut checks = Vec::new();
    for (k, traj) in trajectories.iter().enumerate() {
        let sys = traj.system();
        let r = sys.norm(traj.x0());
        let g = gains.gamma.apply(traj.input().sup_norm());
        let t0 = traj.t0();
        for (t, x) in traj.samples() {
            let bound = gains.beta.eval(r, t - t0) + g;
            let tol = opts.iss_rel * (1.0 + bound.abs());
            let margin = bound - sys.norm(x);
            // A NaN bound (failed inversion) must not pass.
            let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
            checks.push(Check::new(ConditionId::IssEstimate, k, t, margin, tol));
        }
    }
    VerificationReport::from_checks(checks)
}

/// The samples `(t, V(t, x(t)), pre_jump)` of a trajectory; impulse times
/// appear twice, the left limit first.
pub fn lyapunov_series(v: &TimeVaryingLyapunov, traj: &Trajectory) -> Vec<(f64, f64, bool)> {
    let mut out = Vec::with_capacity(traj.sample_count() + traj.left_limits().len());
    for (j, piece) in traj.pieces().iter().enumerate() {
        if j > 0 {
            let l = &traj.left_limits()[j - 1];
            out.push((l.t, v.eval_left(l.t, &l.state), true));
        }
        let seg = v.impulses().segment_at(piece.start);
        for (t, x) in piece.samples() {
            out.push((t, v.eval_in(&seg, t, x), false));
        }
    }
    out
}

/// Describes a report in one line, e.g. for logs.
pub fn describe(report: &VerificationReport) -> String {
    let failed = report.failures().count();
    format!(
        "{} checks, {} failed, worst margin {:.3e}: {}",
        report.checks.len(),
        failed,
        report.worst_margin,
        if report.passed { "pass" } else { "fail" }
    )
}
