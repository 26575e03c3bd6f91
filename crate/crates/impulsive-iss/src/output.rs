//! CSV and JSON artifacts.
//!
//! Floats in CSV files are written with 17 significant digits so they read
//! back bit-exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use impulsive_iss_core::construct::{DwellReport, Provenance};
use impulsive_iss_core::lyapunov::{Check, VerificationReport};
use impulsive_iss_core::{CandidateLyapunov, TimeVaryingLyapunov, Trajectory};
use serde_json::{json, Value};

pub fn float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(File::create(path)?)))
}

/// Something that assigns a Lyapunov value to a trajectory sample.
pub enum ValueSource<'a> {
    TimeVarying(&'a TimeVaryingLyapunov),
    Candidate(&'a CandidateLyapunov),
    None,
}

impl ValueSource<'_> {
    fn at(&self, t: f64, x: &[f64], pre_jump: bool) -> Option<f64> {
        match self {
            ValueSource::TimeVarying(v) if pre_jump => Some(v.eval_left(t, x)),
            ValueSource::TimeVarying(v) => Some(v.eval(t, x)),
            ValueSource::Candidate(c) => Some(c.eval(x)),
            ValueSource::None => None,
        }
    }
}

/// Samples in time order; each impulse time appears twice, pre-jump first.
fn rows(traj: &Trajectory) -> Vec<(f64, &[f64], bool)> {
    let mut out = Vec::with_capacity(traj.sample_count() + traj.left_limits().len());
    for (j, piece) in traj.pieces().iter().enumerate() {
        if j > 0 {
            let l = &traj.left_limits()[j - 1];
            out.push((l.t, l.state.as_slice(), true));
        }
        out.extend(piece.samples().map(|(t, x)| (t, x, false)));
    }
    out
}

/// `t,norm,V,pre_jump,x_0,…`; `V` is empty when no function is attached.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, value: &ValueSource) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    let dim = traj.system().dim();
    let mut header = vec!["t".to_string(), "norm".into(), "V".into(), "pre_jump".into()];
    header.extend((0..dim).map(|k| format!("x_{k}")));
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for (t, x, pre) in rows(traj) {
        rec.clear();
        rec.push(float(t));
        rec.push(float(traj.system().norm(x)));
        rec.push(value.at(t, x, pre).map(float).unwrap_or_default());
        rec.push(if pre { "1" } else { "0" }.to_string());
        rec.extend(x.iter().map(|&v| float(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,V,chi_level,pre_jump` with a constant gate level.
pub fn write_lyapunov_csv(path: &Path, traj: &Trajectory, value: &ValueSource, chi_level: f64) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "V", "chi_level", "pre_jump"])?;
    let level = float(chi_level);
    for (t, x, pre) in rows(traj) {
        let v = value.at(t, x, pre).map(float).unwrap_or_default();
        w.write_record([float(t), v, level.clone(), if pre { "1" } else { "0" }.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_region_csv(path: &Path, rows: &[(f64, f64, bool)]) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["theta", "delta", "pass"])?;
    for &(theta, delta, pass) in rows {
        w.write_record([float(theta), float(delta), if pass { "1" } else { "0" }.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON numbers cannot carry NaN or infinities; those become strings.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(float(v))
    }
}

/// Failing checks listed in `report.json`, beyond which only the count is kept.
pub const MAX_LISTED_FAILURES: usize = 1000;

fn check_json(c: &Check) -> Value {
    json!({
        "condition_id": c.condition.as_str(),
        "trajectory": c.trajectory,
        "t": num(c.t),
        "margin": num(c.margin),
        "tolerance": num(c.tolerance),
        "pass": c.passed,
    })
}

/// Summary per condition, the worst check of each condition and the first
/// failing checks.
pub fn report_json(name: &str, r: &VerificationReport) -> Value {
    let summary: Vec<Value> = r
        .summary()
        .iter()
        .map(|s| {
            let worst = r
                .of(s.condition)
                .min_by(|a, b| (a.margin + a.tolerance).total_cmp(&(b.margin + b.tolerance)))
                .map(check_json);
            json!({
                "condition_id": s.condition.as_str(),
                "count": s.count,
                "failures": s.failures,
                "worst_margin": num(s.worst_margin),
                "worst_t": num(s.worst_t),
                "worst": worst,
            })
        })
        .collect();
    let failures: Vec<Value> = r.failures().take(MAX_LISTED_FAILURES).map(check_json).collect();
    json!({
        "name": name,
        "pass": r.passed,
        "checks": r.checks.len(),
        "worst_margin": num(r.worst_margin),
        "summary": summary,
        "failures": failures,
        "failures_total": r.failures().count(),
    })
}

pub fn dwell_json(d: &DwellReport) -> Value {
    json!({
        "regime": d.regime.name(),
        "extreme_integral": num(d.extreme),
        "bound": num(d.bound),
        "margin": num(d.margin),
        "pass": d.passed,
        "grid_points": d.integrals.len(),
    })
}

pub fn provenance_json(p: &Provenance) -> Value {
    let theorem = match p.regime {
        impulsive_iss_core::Regime::Sfuj => "stable flows, unstable jumps",
        impulsive_iss_core::Regime::Ufsj => "unstable flows, stable jumps",
    };
    json!({
        "regime": p.regime.name(),
        "construction": theorem,
        "theta": num(p.theta),
        "delta": num(p.delta),
        "kappa": p.kappa_c.map(|c| json!({ "form": "c*s^2/(1+s)", "c": num(c) })),
        "transform_lower_limit": num(p.lower_limit),
        "dwell": dwell_json(&p.dwell),
        "notes": p.notes,
    })
}

pub fn write_json(path: &Path, v: &Value) -> anyhow::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, v)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}
