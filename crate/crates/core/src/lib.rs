//! Numerical core for input-to-state stability (ISS) analysis of impulsive
//! systems.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It provides:
//!
//! - [`comparison`]: class K / K∞ / P comparison functions with grid
//!   certification, inversion and composition.
//! - [`transform`]: the integral transform `F(q) = ∫₁^q ds / rate(s)`, its
//!   inverse, the relaxed KL bound built from it and the resulting ISS gains.
//! - [`system`]: impulsive systems, a fixed-step RK4 simulator that lands on
//!   every impulse time, right-continuous trajectories with stored left
//!   limits, and a finite-difference heat equation.
//! - [`lyapunov`]: candidate and time-varying ISS-Lyapunov functions and
//!   trajectory-sampled verification of their inequalities.
//! - [`construct`]: dwell-time checks and the constructions that turn a
//!   candidate ISS-Lyapunov function into a time-varying one.
//! - [`scenarios`]: the built-in worked examples.
//!
//! All checks are numerical and sampled; a passing report means "no
//! violation found on the sampled data", not a proof.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod comparison;
pub mod construct;
pub mod error;
pub mod lyapunov;
pub(crate) mod math;
pub mod quadrature;
pub mod root;
pub mod scenarios;
pub mod system;
pub mod transform;

pub use comparison::{ClassReport, ClassTag, ComparisonFunction, KLFunction, Rate};
pub use construct::{ConstructionResult, DwellParams, DwellReport, Kappa, Provenance, Regime};
pub use error::{Error, Result};
pub use lyapunov::{
    CandidateLyapunov, CandidateRates, Certificates, Check, ConditionId, TimeVaryingLyapunov, VerificationReport,
    VerifyOptions,
};
pub use scenarios::{HeatParams, Scenario};
pub use system::{GridMeta, HeatJump, ImpulseSequence, ImpulsiveSystem, InputSignal, Segment, Trajectory};
pub use transform::{IssGains, MonotoneTransform};
