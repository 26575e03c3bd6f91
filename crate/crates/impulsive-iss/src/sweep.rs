//! Dwell-condition sweeps over `(θ, δ)` grids.

use impulsive_iss_core::construct::check_dwell;
use impulsive_iss_core::{ComparisonFunction, DwellParams, Rate, Regime};
use rayon::prelude::*;

/// Environment variable capping sweep threads.
pub const THREADS_ENV: &str = "IMPULSIVE_ISS_THREADS";

/// `n` evenly spaced values over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Range {
    /// `lo:hi:n` or a single value.
    pub fn parse(s: &str) -> Result<Self, String> {
        let bad = |e: &dyn std::fmt::Display| format!("bad range {s:?}: {e}");
        let parts: Vec<&str> = s.split(':').collect();
        let r = match parts.as_slice() {
            [v] => {
                let v: f64 = v.trim().parse().map_err(|e| bad(&e))?;
                Range { lo: v, hi: v, n: 1 }
            }
            [lo, hi, n] => Range {
                lo: lo.trim().parse().map_err(|e| bad(&e))?,
                hi: hi.trim().parse().map_err(|e| bad(&e))?,
                n: n.trim().parse().map_err(|e| bad(&e))?,
            },
            _ => return Err(bad(&"expected lo:hi:n or a number")),
        };
        if r.n == 0 || !(r.lo <= r.hi) || !r.lo.is_finite() || !r.hi.is_finite() {
            return Err(bad(&"need finite lo <= hi and n >= 1"));
        }
        if r.n == 1 && r.lo != r.hi {
            return Err(bad(&"a single point needs lo = hi"));
        }
        Ok(r)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|k| if k + 1 == self.n { self.hi } else { self.lo + k as f64 * h }).collect()
    }

    pub fn spacing(&self) -> f64 {
        if self.n > 1 {
            (self.hi - self.lo) / (self.n - 1) as f64
        } else {
            0.0
        }
    }
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// `(θ, δ, pass)` rows in row-major order (θ outer). Points with
/// `θ ≤ δ` or `δ ≤ 0` are reported as failing.
pub fn dwell_region(
    regime: Regime,
    rho: &Rate,
    alpha: &ComparisonFunction,
    theta: &Range,
    delta: &Range,
) -> anyhow::Result<Vec<(f64, f64, bool)>> {
    let points: Vec<(f64, f64)> =
        theta.values().into_iter().flat_map(|t| delta.values().into_iter().map(move |d| (t, d))).collect();
    let eval = |&(t, d): &(f64, f64)| -> anyhow::Result<(f64, f64, bool)> {
        let Ok(p) = DwellParams::new(rho.clone(), alpha.clone(), t, d) else {
            return Ok((t, d, false));
        };
        Ok((t, d, check_dwell(regime, &p)?.passed))
    };
    let run = || points.par_iter().map(eval).collect::<anyhow::Result<Vec<_>>>();
    match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(run),
        None => run(),
    }
}
