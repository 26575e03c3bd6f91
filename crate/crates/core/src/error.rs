use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numerical core.
///
/// Verification failures are never errors; they are entries in a
/// [`VerificationReport`](crate::lyapunov::VerificationReport).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("target {target} is outside the bracket image [{lo}, {hi}]")]
    Bracketing { target: f64, lo: f64, hi: f64 },
    #[error("class violation: {0}")]
    ClassViolation(String),
    #[error("rate must be positive on (0, inf); found {value} at s = {at}")]
    RateSign { at: f64, value: f64 },
    #[error("value {value} lies below the transform image (lower limit {lower})")]
    Image { value: f64, lower: f64 },
    #[error("state blew up after t = {last_finite_time}")]
    BlowUp { last_finite_time: f64 },
    #[error("time {t} is outside the simulated range [{lo}, {hi}]")]
    Range { t: f64, lo: f64, hi: f64 },
    #[error("t = {t} with step {h} crosses the segment end {end}")]
    SegmentBoundary { t: f64, h: f64, end: f64 },
    #[error("grid error: {0}")]
    Grid(String),
    #[error("jump orientation error: alpha({a}) = {alpha_a} is not below a")]
    Orientation { a: f64, alpha_a: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("impulse sequence error: {0}")]
    Sequence(String),
    #[error("construction error: {0}")]
    Construction(String),
}
