//! Built-in worked examples.
//!
//! - `rotation2d`: `ẋ = Ax` with `A = [[1, 1], [−1, 1]]`, jumps
//!   `(x₁, x₂) ↦ (2x₁, u·tanh x₂)` at `tᵢ = iπ/2`, and the closed-form
//!   `V(t, x) = e^{−4τ} xᵀR(τ)DR(τ)ᵀx`, `τ = t − tₙ`, `D = diag(1/4, 2e^{2π})`.
//! - `heat`: `ẋ = a·x_yy + 2x` on `[−1, 1]` with zero boundary values,
//!   impulses every `c = 0.5`, and `V(t, x) = ‖e^{−h(t)}x‖₂²` with
//!   `h(t) = (t − tₙ)/(tₙ₊₁ − tₙ) − 1/2`.
//! - `scalar-sfuj` and `scalar-ufsj`: one-dimensional candidates for the two
//!   construction regimes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use core::f64::consts::{E, FRAC_PI_2, LN_2, PI};

use crate::comparison::{ComparisonFunction, Rate};
use crate::construct::Regime;
use crate::error::{Error, Result};
use crate::lyapunov::{CandidateLyapunov, CandidateRates, Certificates, TimeVaryingLyapunov};
use crate::math;
use crate::system::{
    semidiscretize_heat, simulate_from, HeatJump, ImpulseSequence, ImpulsiveSystem, InputSignal, Trajectory,
};

/// Regime and dwell parameters a scenario is meant to be constructed with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructionHint {
    pub regime: Regime,
    pub theta: f64,
    pub delta: f64,
}

/// A system with input, initial state, run settings and optional Lyapunov
/// data.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub system: ImpulsiveSystem,
    pub input: InputSignal,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub lyapunov: Option<TimeVaryingLyapunov>,
    pub candidate: Option<CandidateLyapunov>,
    pub construction: Option<ConstructionHint>,
    /// Extra `(t_start, x_start)` pairs simulated during verification, in
    /// addition to `(t₀, x0)`.
    pub extra_starts: Vec<(f64, Vec<f64>)>,
}

impl Scenario {
    pub fn new(
        label: impl Into<String>,
        system: ImpulsiveSystem,
        input: InputSignal,
        x0: Vec<f64>,
        horizon: f64,
        step: f64,
    ) -> Result<Self> {
        if x0.len() != system.dim() {
            return Err(Error::Argument(format!("x0 has length {}, system dimension is {}", x0.len(), system.dim())));
        }
        Ok(Scenario {
            label: label.into(),
            system,
            input,
            x0,
            horizon,
            step,
            lyapunov: None,
            candidate: None,
            construction: None,
            extra_starts: Vec::new(),
        })
    }

    pub fn t0(&self) -> f64 {
        self.system.impulses().origin()
    }

    pub fn simulate(&self) -> Result<Trajectory> {
        simulate_from(&self.system, self.t0(), &self.x0, &self.input, self.horizon, self.step)
    }

    /// The main trajectory followed by one per extra start.
    pub fn verification_trajectories(&self) -> Result<Vec<Trajectory>> {
        let mut out = alloc::vec![self.simulate()?];
        for (t, x) in &self.extra_starts {
            if *t < self.horizon {
                out.push(simulate_from(&self.system, *t, x, &self.input, self.horizon, self.step)?);
            }
        }
        Ok(out)
    }

    pub fn with_input(mut self, input: InputSignal) -> Self {
        self.input = input;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.system.dim() {
            return Err(Error::Argument(format!(
                "x0 has length {}, system dimension is {}",
                x0.len(),
                self.system.dim()
            )));
        }
        self.x0 = x0;
        Ok(self)
    }
}

/// `D₂₂` of the rotation example.
fn rotation_d22() -> f64 {
    2.0 * math::exp(2.0 * PI)
}

/// `χ(s) = 8e^{6π}s²` for the rotation example.
pub fn rotation2d_chi() -> ComparisonFunction {
    ComparisonFunction::power(8.0 * math::exp(6.0 * PI), 2.0).with_label("8e^(6pi)s^2")
}

/// The rotation example's time-varying function. With `discount = false`
/// the `e^{−4τ}` factor is dropped (a deliberately wrong function).
///
/// Certificates come from the extreme eigenvalues of `e^{−4τ}RDRᵀ` for
/// `τ ∈ [0, π/2)`: `α₁(s) = e^{−2π}s²/4`, `α₂(s) = 2e^{2π}s²`. The decay is
/// `φ(v) = 2v`, and `α₃ = χ`.
pub fn rotation2d_lyapunov(impulses: ImpulseSequence, discount: bool) -> TimeVaryingLyapunov {
    let d22 = rotation_d22();
    let chi = rotation2d_chi();
    let certs = Certificates {
        alpha1: ComparisonFunction::power(0.25 * math::exp(-2.0 * PI), 2.0),
        alpha2: ComparisonFunction::power(d22, 2.0),
        alpha3: chi.clone(),
        chi,
        phi: ComparisonFunction::linear(2.0),
    };
    let label = if discount { "rotation2d" } else { "rotation2d[no discount]" };
    TimeVaryingLyapunov::new(label, impulses, certs, move |seg, t, x| {
        let tau = t - seg.start;
        let (s, c) = (math::sin(tau), math::cos(tau));
        let y1 = c * x[0] - s * x[1];
        let y2 = s * x[0] + c * x[1];
        let q = 0.25 * y1 * y1 + d22 * y2 * y2;
        if discount {
            math::exp(-4.0 * tau) * q
        } else {
            q
        }
    })
}

pub fn rotation2d_system() -> ImpulsiveSystem {
    ImpulsiveSystem::new(
        "rotation2d",
        2,
        ImpulseSequence::periodic(0.0, FRAC_PI_2).expect("positive period"),
        |_, x, _, dx| {
            dx[0] = x[0] + x[1];
            dx[1] = -x[0] + x[1];
        },
        |_, x, u, out| {
            out[0] = 2.0 * x[0];
            out[1] = u * math::tanh(x[1]);
        },
    )
}

/// The rotation example with constant input `u_level`, `x0 = (1, 1)`,
/// step `1e-4`. Verification also restarts from `x0` at every impulse time
/// before the horizon, since with `u = 0` each trajectory reaches the origin
/// after two impulses.
pub fn scenario_rotation2d(u_level: f64, horizon: f64) -> Result<Scenario> {
    if !(horizon > 0.0) {
        return Err(Error::Argument(format!("horizon must be positive, got {horizon}")));
    }
    let system = rotation2d_system();
    let lyapunov = rotation2d_lyapunov(system.impulses().clone(), true);
    let x0 = alloc::vec![1.0, 1.0];
    let mut sc = Scenario::new("rotation2d", system, InputSignal::constant(u_level), x0.clone(), horizon, 1e-4)?;
    sc.lyapunov = Some(lyapunov);
    sc.extra_starts =
        sc.system.impulses().impulses_in(0.0, horizon).into_iter().map(|(_, t)| (t, x0.clone())).collect();
    Ok(sc)
}

/// Parameters of the heat example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatParams {
    pub a: f64,
    pub f_gain: f64,
    pub u_level: f64,
    /// Impulse period `c`.
    pub period: f64,
    pub horizon: f64,
    pub step: f64,
    pub jump: HeatJump,
}

impl Default for HeatParams {
    fn default() -> Self {
        HeatParams { a: 0.1, f_gain: 2.0, u_level: 0.1, period: 0.5, horizon: 2.0, step: 1e-3, jump: HeatJump::Uniform }
    }
}

/// Certificates of the heat example:
/// `α₁(s) = s²/e`, `α₂(s) = e·s²`, `χ(s) = 4e⁵s²`, `φ(v) = (a/2)v`,
/// `α₃(s) = 4e⁴s²`. They are derived for `f_gain ≤ 1/c`.
pub fn heat_certificates(a: f64) -> Certificates {
    Certificates {
        alpha1: ComparisonFunction::power(1.0 / E, 2.0),
        alpha2: ComparisonFunction::power(E, 2.0),
        chi: ComparisonFunction::power(4.0 * math::exp(5.0), 2.0).with_label("4e^5s^2"),
        phi: ComparisonFunction::linear(0.5 * a),
        alpha3: ComparisonFunction::power(4.0 * math::exp(4.0), 2.0).with_label("4e^4s^2"),
    }
}

/// `x0(y) = 2(y² − 1)²` on the interior nodes.
pub fn heat_initial_state(system: &ImpulsiveSystem) -> Vec<f64> {
    system.grid().map(|g| g.nodes.iter().map(|y| 2.0 * (y * y - 1.0) * (y * y - 1.0)).collect()).unwrap_or_default()
}

/// The heat example on `n` interior nodes.
pub fn scenario_heat(n: usize, p: HeatParams) -> Result<Scenario> {
    let impulses = ImpulseSequence::periodic(0.0, p.period)?;
    let system = semidiscretize_heat(p.a, n, p.f_gain, p.jump, impulses.clone())?;
    let h = system.grid().expect("heat system has a grid").spacing;
    let lyapunov = TimeVaryingLyapunov::new("heat", impulses, heat_certificates(p.a), move |seg, t, x| {
        let shift = seg.elapsed_fraction(t) - 0.5;
        math::exp(-2.0 * shift) * h * x.iter().map(|v| v * v).sum::<f64>()
    });
    let x0 = heat_initial_state(&system);
    let mut sc = Scenario::new(
        format!("heat(n={n}, jump={})", p.jump.name()),
        system,
        InputSignal::constant(p.u_level),
        x0,
        p.horizon,
        p.step,
    )?;
    sc.lyapunov = Some(lyapunov);
    Ok(sc)
}

fn square() -> ComparisonFunction {
    ComparisonFunction::power(1.0, 2.0)
}

/// `ẋ = −x`, jumps `x ↦ √2·x` every unit of time, `V_cand = x²` with
/// `ρ(v) = 2v`, `α(a) = 2a`. Dwell parameters `θ = 1`, `δ = 1 − ln2/2`.
pub fn scenario_scalar_sfuj() -> Result<Scenario> {
    let system = ImpulsiveSystem::new(
        "scalar-sfuj",
        1,
        ImpulseSequence::periodic(0.0, 1.0)?,
        |_, x, _, dx| dx[0] = -x[0],
        |_, x, _, out| out[0] = core::f64::consts::SQRT_2 * x[0],
    );
    let candidate = CandidateLyapunov::new(
        "x^2",
        CandidateRates {
            psi1: square(),
            psi2: square(),
            eta: square(),
            rho: Rate::linear(2.0),
            alpha: ComparisonFunction::linear(2.0),
            psi3: ComparisonFunction::power(2.0, 2.0),
        },
        |x| x[0] * x[0],
    );
    let mut sc = Scenario::new("scalar-sfuj", system, InputSignal::zero(), alloc::vec![1.0], 5.0, 1e-3)?;
    sc.candidate = Some(candidate);
    sc.construction = Some(ConstructionHint { regime: Regime::Sfuj, theta: 1.0, delta: 1.0 - LN_2 / 2.0 });
    Ok(sc)
}

/// `ẋ = x`, jumps `x ↦ x/2` every `0.5`, `V_cand = x²` with `ρ(v) = −2v`,
/// `α(a) = a/4`. Dwell parameters `θ = 0.5`, `δ = 0.1`, so
/// `θ + δ = 0.6 ≤ ∫_{a/4}^a ds/(2s) = ln 2`.
pub fn scenario_scalar_ufsj() -> Result<Scenario> {
    let system = ImpulsiveSystem::new(
        "scalar-ufsj",
        1,
        ImpulseSequence::periodic(0.0, 0.5)?,
        |_, x, _, dx| dx[0] = x[0],
        |_, x, _, out| out[0] = 0.5 * x[0],
    );
    let candidate = CandidateLyapunov::new(
        "x^2",
        CandidateRates {
            psi1: square(),
            psi2: square(),
            eta: square(),
            rho: Rate::linear(-2.0),
            alpha: ComparisonFunction::linear(0.25),
            psi3: square(),
        },
        |x| x[0] * x[0],
    );
    let mut sc = Scenario::new("scalar-ufsj", system, InputSignal::zero(), alloc::vec![1.0], 5.0, 1e-3)?;
    sc.candidate = Some(candidate);
    sc.construction = Some(ConstructionHint { regime: Regime::Ufsj, theta: 0.5, delta: 0.1 });
    Ok(sc)
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 4] = ["heat", "rotation2d", "scalar-sfuj", "scalar-ufsj"];

/// A built-in scenario by name with default parameters.
pub fn builtin(name: &str) -> Option<Result<Scenario>> {
    Some(match name {
        "heat" => scenario_heat(201, HeatParams::default()),
        "rotation2d" => scenario_rotation2d(0.0, 2.0 * PI),
        "scalar-sfuj" => scenario_scalar_sfuj(),
        "scalar-ufsj" => scenario_scalar_ufsj(),
        _ => return None,
    })
}
