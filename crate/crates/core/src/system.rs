//! Impulsive systems and their simulation.
//!
//! A system flows by `ẋ = flow(t, x, u)` between impulse times and jumps by
//! `x(tᵢ) = jumpᵢ(x⁻(tᵢ), u⁻(tᵢ))` at them. Trajectories are right-continuous:
//! each flow piece starts with the post-jump state and the pre-jump state is
//! kept separately as the left limit.
//!
//! Integration is classical fixed-step RK4. The last step of every piece is
//! shortened so the integrator lands exactly on the impulse time. Systems
//! that declare a stiffness bound `L` (an upper bound on the spectral radius
//! of the flow Jacobian) have each step split into `⌈L·Δt / 2.5⌉` equal
//! substeps, which keeps RK4 inside its stability region; the dense output
//! grid is unchanged.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::math;

pub type FlowFn = Arc<dyn Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync>;
pub type JumpFn = Arc<dyn Fn(usize, &[f64], f64, &mut [f64]) + Send + Sync>;
pub type InputFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Any state component beyond this magnitude counts as a blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Offset used to evaluate the input's left limit `u⁻(tᵢ)`.
pub const INPUT_LEFT_OFFSET: f64 = 1e-12;

/// `z = L·Δt` kept below this per substep (RK4's real-axis limit is ≈ 2.785).
const RK4_STABLE_Z: f64 = 2.5;

/// A half-open time interval `[start, end)` between consecutive impulses.
///
/// `index` is `i` for `[tᵢ, tᵢ₊₁)`, with `t₀` the origin of the sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    /// `(t − start)/(end − start)`, with the limit 0 on unbounded segments.
    pub fn elapsed_fraction(&self, t: f64) -> f64 {
        if self.end.is_finite() {
            (t - self.start) / (self.end - self.start)
        } else {
            0.0
        }
    }

    /// `(end − t)/(end − start)`, with the limit 1 on unbounded segments.
    pub fn remaining_fraction(&self, t: f64) -> f64 {
        if self.end.is_finite() {
            (self.end - t) / (self.end - self.start)
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Times {
    Periodic { period: f64 },
    Explicit(Arc<[f64]>),
}

/// Strictly increasing impulse times `t₁ < t₂ < …` after an origin `t₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSequence {
    origin: f64,
    times: Times,
}

impl ImpulseSequence {
    /// `tᵢ = origin + i·period`, `i ≥ 1`.
    pub fn periodic(origin: f64, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Sequence(format!("period must be positive, got {period}")));
        }
        Ok(ImpulseSequence { origin, times: Times::Periodic { period } })
    }

    /// A finite list; no impulses occur after the last entry.
    pub fn explicit(origin: f64, times: Vec<f64>) -> Result<Self> {
        let mut prev = origin;
        for &t in &times {
            if !(t > prev) {
                return Err(Error::Sequence(format!("impulse times must increase strictly after {prev}, got {t}")));
            }
            prev = t;
        }
        Ok(ImpulseSequence { origin, times: Times::Explicit(times.into()) })
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn period(&self) -> Option<f64> {
        match self.times {
            Times::Periodic { period } => Some(period),
            Times::Explicit(_) => None,
        }
    }

    pub fn explicit_times(&self) -> Option<&[f64]> {
        match &self.times {
            Times::Explicit(t) => Some(t),
            Times::Periodic { .. } => None,
        }
    }

    /// `tᵢ` for `i ≥ 1`; `t₀` (the origin) for `i = 0`.
    pub fn time(&self, i: usize) -> Option<f64> {
        if i == 0 {
            return Some(self.origin);
        }
        match &self.times {
            Times::Periodic { period } => Some(self.origin + i as f64 * period),
            Times::Explicit(t) => t.get(i - 1).copied(),
        }
    }

    /// Largest `i` with `tᵢ ≤ t` (0 when no impulse has happened yet).
    pub fn index_at(&self, t: f64) -> usize {
        match &self.times {
            Times::Periodic { period } => {
                if t < self.origin + period {
                    return 0;
                }
                let mut i = math::floor((t - self.origin) / period).max(0.0) as usize;
                while self.origin + (i + 1) as f64 * period <= t {
                    i += 1;
                }
                while i > 0 && self.origin + i as f64 * period > t {
                    i -= 1;
                }
                i
            }
            Times::Explicit(times) => times.partition_point(|&ti| ti <= t),
        }
    }

    /// The segment `[tᵢ, tᵢ₊₁)` containing `t` (right-continuous convention).
    pub fn segment_at(&self, t: f64) -> Segment {
        self.segment(self.index_at(t))
    }

    /// The segment `[tᵢ, tᵢ₊₁)`; `end` is `+∞` past the last explicit time.
    pub fn segment(&self, i: usize) -> Segment {
        Segment {
            index: i,
            start: self.time(i).unwrap_or(f64::INFINITY),
            end: self.time(i + 1).unwrap_or(f64::INFINITY),
        }
    }

    /// Impulses `(i, tᵢ)` with `a < tᵢ ≤ b`.
    pub fn impulses_in(&self, a: f64, b: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut i = self.index_at(a) + 1;
        while let Some(t) = self.time(i) {
            if t > b {
                break;
            }
            if t > a {
                out.push((i, t));
            }
            i += 1;
        }
        out
    }

    /// Smallest gap `tᵢ₊₁ − tᵢ`, `i ≥ 0`, over gaps ending at or before
    /// `horizon` (all gaps for a periodic sequence).
    pub fn min_gap(&self, horizon: f64) -> f64 {
        self.gaps(horizon).fold(f64::INFINITY, f64::min)
    }

    /// Largest finite gap `tᵢ₊₁ − tᵢ` ending at or before `horizon`.
    pub fn max_gap(&self, horizon: f64) -> f64 {
        self.gaps(horizon).fold(0.0, f64::max)
    }

    fn gaps(&self, horizon: f64) -> impl Iterator<Item = f64> + '_ {
        let period = self.period();
        let list: Vec<f64> = match &self.times {
            Times::Periodic { .. } => Vec::new(),
            Times::Explicit(t) => {
                let mut prev = self.origin;
                let mut gaps = Vec::new();
                for &ti in t.iter().filter(|&&ti| ti <= horizon) {
                    gaps.push(ti - prev);
                    prev = ti;
                }
                gaps
            }
        };
        period.into_iter().chain(list)
    }

    /// The same impulse times with a later origin; used to restart a
    /// simulation mid-way. For periodic sequences only the simulation start
    /// moves, the time grid `origin + i·period` is kept.
    pub fn restart_at(&self, _t: f64) -> Self {
        self.clone()
    }
}

/// A scalar input `u(t)` with a known bound `‖u‖∞`.
#[derive(Clone)]
pub struct InputSignal {
    f: InputFn,
    sup_norm: f64,
    label: String,
}

impl fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InputSignal").field("label", &self.label).field("sup_norm", &self.sup_norm).finish()
    }
}

impl InputSignal {
    pub fn constant(level: f64) -> Self {
        InputSignal { f: Arc::new(move |_| level), sup_norm: level.abs(), label: format!("constant:{level}") }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// An arbitrary input with a caller-supplied `‖u‖∞`.
    pub fn from_fn<F>(label: impl Into<String>, sup_norm: f64, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        InputSignal { f: Arc::new(f), sup_norm, label: label.into() }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// `u⁻(t)`, evaluated slightly before `t`.
    #[inline]
    pub fn left_limit(&self, t: f64) -> f64 {
        (self.f)(t - INPUT_LEFT_OFFSET)
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Largest sampled `|u|` over `n` evenly spaced points of `[a, b]`.
    pub fn sampled_sup(&self, a: f64, b: f64, n: usize) -> f64 {
        math::lin_space(a, b, n.max(2)).into_iter().map(|t| self.eval(t).abs()).fold(0.0, f64::max)
    }
}

/// Uniform spatial grid of a semidiscretized PDE on `[lo, hi]` with zero
/// Dirichlet values at both ends. Only interior nodes carry state.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeta {
    pub lo: f64,
    pub hi: f64,
    pub spacing: f64,
    pub nodes: Vec<f64>,
}

impl GridMeta {
    pub fn uniform(lo: f64, hi: f64, interior: usize) -> Self {
        let spacing = (hi - lo) / (interior + 1) as f64;
        let nodes = (1..=interior).map(|j| lo + j as f64 * spacing).collect();
        GridMeta { lo, hi, spacing, nodes }
    }
}

/// `(∫ x(y)² dy)^{1/2}` by the composite trapezoid rule with zero boundary
/// values.
pub fn l2_norm(state: &[f64], grid: Option<&GridMeta>) -> Result<f64> {
    let grid = grid.ok_or_else(|| Error::Argument("L2 norm needs grid metadata".into()))?;
    if state.len() != grid.nodes.len() {
        return Err(Error::Argument(format!("state has {} nodes, grid has {}", state.len(), grid.nodes.len())));
    }
    Ok(grid_l2(state, grid.spacing))
}

fn grid_l2(state: &[f64], h: f64) -> f64 {
    math::sqrt(h * state.iter().map(|v| v * v).sum::<f64>())
}

/// L2 norm of the forward-difference gradient, boundary zeros included.
pub fn gradient_l2_norm(state: &[f64], grid: &GridMeta) -> f64 {
    let h = grid.spacing;
    let n = state.len();
    let mut acc = 0.0;
    for j in 0..=n {
        let left = if j == 0 { 0.0 } else { state[j - 1] };
        let right = if j == n { 0.0 } else { state[j] };
        let d = (right - left) / h;
        acc += d * d;
    }
    math::sqrt(h * acc)
}

fn euclidean(x: &[f64]) -> f64 {
    math::sqrt(x.iter().map(|v| v * v).sum())
}

/// An impulsive system on `ℝⁿ` (possibly a semidiscretized PDE).
#[derive(Clone)]
pub struct ImpulsiveSystem {
    dim: usize,
    flow: FlowFn,
    jump: JumpFn,
    impulses: ImpulseSequence,
    grid: Option<GridMeta>,
    stiffness: Option<f64>,
    label: String,
}

impl fmt::Debug for ImpulsiveSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImpulsiveSystem")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("impulses", &self.impulses)
            .field("stiffness", &self.stiffness)
            .finish()
    }
}

impl ImpulsiveSystem {
    /// `flow(t, x, u, dx)` writes `ẋ`; `jump(i, x⁻, u⁻, x⁺)` writes the
    /// post-jump state for the impulse with index `i ≥ 1`.
    pub fn new<F, J>(label: impl Into<String>, dim: usize, impulses: ImpulseSequence, flow: F, jump: J) -> Self
    where
        F: Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync + 'static,
        J: Fn(usize, &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        ImpulsiveSystem {
            dim,
            flow: Arc::new(flow),
            jump: Arc::new(jump),
            impulses,
            grid: None,
            stiffness: None,
            label: label.into(),
        }
    }

    pub fn with_grid(mut self, grid: GridMeta) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn with_stiffness(mut self, bound: f64) -> Self {
        self.stiffness = Some(bound);
        self
    }

    pub fn with_impulses(mut self, impulses: ImpulseSequence) -> Self {
        self.impulses = impulses;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn impulses(&self) -> &ImpulseSequence {
        &self.impulses
    }

    pub fn grid(&self) -> Option<&GridMeta> {
        self.grid.as_ref()
    }

    pub fn stiffness(&self) -> Option<f64> {
        self.stiffness
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// State norm: trapezoid L2 on a spatial grid, Euclidean otherwise.
    pub fn norm(&self, x: &[f64]) -> f64 {
        match &self.grid {
            Some(g) => grid_l2(x, g.spacing),
            None => euclidean(x),
        }
    }

    pub fn flow_into(&self, t: f64, x: &[f64], u: f64, dx: &mut [f64]) {
        (self.flow)(t, x, u, dx)
    }

    pub fn jump_into(&self, i: usize, x: &[f64], u: f64, out: &mut [f64]) {
        (self.jump)(i, x, u, out)
    }

    pub fn jump(&self, i: usize, x: &[f64], u: f64) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        self.jump_into(i, x, u, &mut out);
        out
    }

    fn substeps(&self, dt: f64) -> usize {
        match self.stiffness {
            Some(l) if l > 0.0 => (math::ceil(l * dt.abs() / RK4_STABLE_Z) as usize).max(1),
            _ => 1,
        }
    }
}

/// Heat-equation jump profile; all satisfy `|g| ≤ √(|u|·‖x‖₂)` pointwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatJump {
    /// `g ≡ √(|u|·‖x‖₂)` on every interior node.
    Uniform,
    /// `g(y) = √(|u|·‖x‖₂)·(1 − y²)`.
    Bump,
    /// `g(y) = sign(x(y))·min(|x(y)|, √(|u|‖x‖₂))·|x(y)| / max|x|`.
    ScaledCap,
}

impl HeatJump {
    pub fn name(self) -> &'static str {
        match self {
            HeatJump::Uniform => "uniform",
            HeatJump::Bump => "bump",
            HeatJump::ScaledCap => "scaled-cap",
        }
    }
}

/// Method-of-lines semidiscretization of `ẋ = a·∂²x/∂y² + f_gain·x` on
/// `[−1, 1]` with `x(±1) = 0`, `n` interior nodes (odd, so `y = 0` is a
/// node) and second-order central differences.
pub fn semidiscretize_heat(
    a: f64,
    n: usize,
    f_gain: f64,
    jump: HeatJump,
    impulses: ImpulseSequence,
) -> Result<ImpulsiveSystem> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::Grid(format!("need an odd number of interior nodes ≥ 3, got {n}")));
    }
    if !(a > 0.0) {
        return Err(Error::Argument(format!("diffusivity must be positive, got {a}")));
    }
    let grid = GridMeta::uniform(-1.0, 1.0, n);
    let h = grid.spacing;
    let inv_h2 = 1.0 / (h * h);
    let flow = move |_t: f64, x: &[f64], _u: f64, dx: &mut [f64]| {
        let n = x.len();
        for j in 0..n {
            let left = if j == 0 { 0.0 } else { x[j - 1] };
            let right = if j + 1 == n { 0.0 } else { x[j + 1] };
            dx[j] = a * (left - 2.0 * x[j] + right) * inv_h2 + f_gain * x[j];
        }
    };
    let nodes = grid.nodes.clone();
    let jump_fn = move |_i: usize, x: &[f64], u: f64, out: &mut [f64]| {
        let level = math::sqrt(u.abs() * grid_l2(x, h));
        match jump {
            HeatJump::Uniform => out.iter_mut().for_each(|o| *o = level),
            HeatJump::Bump => {
                for (o, y) in out.iter_mut().zip(&nodes) {
                    *o = level * (1.0 - y * y);
                }
            }
            HeatJump::ScaledCap => {
                let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = if peak > 0.0 { v.signum() * v.abs().min(level) * (v.abs() / peak) } else { 0.0 };
                }
            }
        }
    };
    // Spectral radius of the discrete operator is below 4a/h² + |f_gain|.
    let stiffness = 4.0 * a * inv_h2 + f_gain.abs();
    Ok(ImpulsiveSystem::new(format!("heat(a={a}, n={n}, f={f_gain})"), n, impulses, flow, jump_fn)
        .with_grid(grid)
        .with_stiffness(stiffness))
}

/// One continuous flow piece `[start, end)` of a trajectory with its dense
/// samples. The last piece is closed at the horizon.
#[derive(Debug, Clone)]
pub struct FlowPiece {
    pub segment: Segment,
    pub start: f64,
    pub end: f64,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl FlowPiece {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let n = self.states.len() / self.times.len();
        &self.states[k * n..(k + 1) * n]
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        let n = self.states.len() / self.times.len().max(1);
        self.times.iter().copied().zip(self.states.chunks_exact(n.max(1)))
    }
}

/// The pre-jump state at an impulse.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftLimit {
    pub index: usize,
    pub t: f64,
    pub state: Vec<f64>,
    /// `u⁻(tᵢ)` as used by the jump map.
    pub input: f64,
}

/// A simulated right-continuous trajectory with stored left limits.
///
/// `pieces[k + 1]` starts with `jump(left_limits[k])`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    system: ImpulsiveSystem,
    input: InputSignal,
    x0: Vec<f64>,
    t0: f64,
    horizon: f64,
    step: f64,
    pieces: Vec<FlowPiece>,
    left_limits: Vec<LeftLimit>,
}

impl Trajectory {
    pub fn system(&self) -> &ImpulsiveSystem {
        &self.system
    }

    pub fn input(&self) -> &InputSignal {
        &self.input
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn pieces(&self) -> &[FlowPiece] {
        &self.pieces
    }

    pub fn left_limits(&self) -> &[LeftLimit] {
        &self.left_limits
    }

    pub fn sample_count(&self) -> usize {
        self.pieces.iter().map(FlowPiece::len).sum()
    }

    /// Every dense sample `(t, x(t))` in time order (right-continuous values).
    pub fn samples(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.pieces.iter().flat_map(FlowPiece::samples)
    }

    /// Integrates the flow from `(t, x)` over `dt`.
    pub fn advance(&self, t: f64, x: &[f64], dt: f64) -> Vec<f64> {
        let mut stepper = Stepper::new(self.system.dim);
        let mut out = x.to_vec();
        stepper.step(&self.system, &self.input, t, &mut out, dt);
        out
    }

    fn piece_index(&self, t: f64) -> Result<usize> {
        if !(t >= self.t0 && t <= self.horizon) {
            return Err(Error::Range { t, lo: self.t0, hi: self.horizon });
        }
        Ok(self.pieces.partition_point(|p| p.start <= t).saturating_sub(1))
    }

    /// `x(t)` (right-continuous); between samples the flow is integrated from
    /// the preceding sample.
    pub fn state_at(&self, t: f64) -> Result<Vec<f64>> {
        let piece = &self.pieces[self.piece_index(t)?];
        let rel = ((t - piece.start) / self.step).max(0.0);
        let mut k = (math::floor(rel) as usize).min(piece.len() - 1);
        while k > 0 && piece.times[k] > t {
            k -= 1;
        }
        let tk = piece.times[k];
        if tk == t {
            return Ok(piece.state(k).to_vec());
        }
        Ok(self.advance(tk, piece.state(k), t - tk))
    }

    /// `x⁻(t)`: the stored pre-jump state at impulse times, `x(t)` elsewhere.
    pub fn left_limit(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= self.t0 && t <= self.horizon) {
            return Err(Error::Range { t, lo: self.t0, hi: self.horizon });
        }
        let tol = 1e-12 * t.abs().max(1.0);
        if let Some(l) = self.left_limits.iter().find(|l| (l.t - t).abs() <= tol) {
            return Ok(l.state.clone());
        }
        self.state_at(t)
    }

    /// Largest state norm over all samples and left limits.
    pub fn sup_norm(&self) -> f64 {
        let s = &self.system;
        let a = self.samples().map(|(_, x)| s.norm(x)).fold(0.0, f64::max);
        self.left_limits.iter().map(|l| s.norm(&l.state)).fold(a, f64::max)
    }
}

struct Stepper {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Stepper {
            k1: alloc::vec![0.0; n],
            k2: alloc::vec![0.0; n],
            k3: alloc::vec![0.0; n],
            k4: alloc::vec![0.0; n],
            tmp: alloc::vec![0.0; n],
        }
    }

    /// Advances `x` from `t` by `dt` with as many RK4 substeps as the
    /// system's stiffness bound requires.
    fn step(&mut self, sys: &ImpulsiveSystem, u: &InputSignal, t: f64, x: &mut [f64], dt: f64) {
        let m = sys.substeps(dt);
        let h = dt / m as f64;
        for j in 0..m {
            self.rk4(sys, u, t + j as f64 * h, x, h);
        }
    }

    fn rk4(&mut self, sys: &ImpulsiveSystem, u: &InputSignal, t: f64, x: &mut [f64], h: f64) {
        let half = 0.5 * h;
        sys.flow_into(t, x, u.eval(t), &mut self.k1);
        axpy(&mut self.tmp, x, half, &self.k1);
        sys.flow_into(t + half, &self.tmp, u.eval(t + half), &mut self.k2);
        axpy(&mut self.tmp, x, half, &self.k2);
        sys.flow_into(t + half, &self.tmp, u.eval(t + half), &mut self.k3);
        axpy(&mut self.tmp, x, h, &self.k3);
        sys.flow_into(t + h, &self.tmp, u.eval(t + h), &mut self.k4);
        let w = h / 6.0;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += w * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// `out = x + a·k`.
fn axpy(out: &mut [f64], x: &[f64], a: f64, k: &[f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

fn blown_up(x: &[f64]) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD)
}

/// Simulates from the origin of the system's impulse sequence.
pub fn simulate(sys: &ImpulsiveSystem, x0: &[f64], u: &InputSignal, horizon: f64, step: f64) -> Result<Trajectory> {
    simulate_from(sys, sys.impulses().origin(), x0, u, horizon, step)
}

/// Simulates on `[t_start, horizon]` with `x(t_start) = x0`.
///
/// Dense samples sit at `tᵢ + k·step` inside each piece; the last step of a
/// piece is shortened to land exactly on the next impulse (steps within
/// `1e-9·step` of it are merged into the landing step). Impulses at
/// `t_start < tᵢ ≤ horizon` are applied.
pub fn simulate_from(
    sys: &ImpulsiveSystem,
    t_start: f64,
    x0: &[f64],
    u: &InputSignal,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    if x0.len() != sys.dim() {
        return Err(Error::Argument(format!("x0 has length {}, system dimension is {}", x0.len(), sys.dim())));
    }
    if !(horizon > t_start) {
        return Err(Error::Argument(format!("horizon {horizon} must exceed the start time {t_start}")));
    }
    if !(step > 0.0) {
        return Err(Error::Argument(format!("step must be positive, got {step}")));
    }
    let min_gap = sys.impulses().min_gap(horizon);
    if !(step < min_gap) {
        return Err(Error::Argument(format!("step {step} must be below the smallest impulse gap {min_gap}")));
    }
    if blown_up(x0) {
        return Err(Error::BlowUp { last_finite_time: t_start });
    }

    let impulses = sys.impulses().impulses_in(t_start, horizon);
    let mut stepper = Stepper::new(sys.dim());
    let mut pieces = Vec::with_capacity(impulses.len() + 1);
    let mut left_limits = Vec::with_capacity(impulses.len());
    let mut x = x0.to_vec();
    let mut start = t_start;

    for k in 0..=impulses.len() {
        let (end, closed) = match impulses.get(k) {
            Some(&(_, ti)) => (ti, false),
            None => (horizon, true),
        };
        let segment = sys.impulses().segment_at(start);
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut t = start;
        times.push(t);
        states.extend_from_slice(&x);
        let mut j = 0usize;
        while t < end {
            let grid_next = start + (j + 1) as f64 * step;
            let (t_next, landing) = if grid_next >= end - 1e-9 * step { (end, true) } else { (grid_next, false) };
            stepper.step(sys, u, t, &mut x, t_next - t);
            if blown_up(&x) {
                return Err(Error::BlowUp { last_finite_time: t });
            }
            t = t_next;
            j += 1;
            if landing {
                break;
            }
            times.push(t);
            states.extend_from_slice(&x);
        }
        if closed {
            if times[times.len() - 1] != end {
                times.push(end);
                states.extend_from_slice(&x);
            }
            pieces.push(FlowPiece { segment, start, end, times, states });
            break;
        }
        pieces.push(FlowPiece { segment, start, end, times, states });
        let (index, ti) = impulses[k];
        let u_minus = u.left_limit(ti);
        let mut post = alloc::vec![0.0; sys.dim()];
        sys.jump_into(index, &x, u_minus, &mut post);
        if blown_up(&post) {
            return Err(Error::BlowUp { last_finite_time: ti });
        }
        left_limits.push(LeftLimit { index, t: ti, state: core::mem::replace(&mut x, post), input: u_minus });
        start = ti;
    }

    Ok(Trajectory {
        system: sys.clone(),
        input: u.clone(),
        x0: x0.to_vec(),
        t0: t_start,
        horizon,
        step,
        pieces,
        left_limits,
    })
}
