//! TOML scenario files.
//!
//! ```toml
//! label = "scalar"
//!
//! [system]
//! dim = 1
//! flow = { kind = "linear", a = [[-1.0]] }
//! jump = { kind = "linear", a = [[1.4142135623730951]] }
//! impulses = { periodic = 1.0 }
//!
//! [input]
//! kind = "constant"
//! level = 0.0
//!
//! [candidate]
//! value = "quadratic"
//! psi1 = "power:1,2"
//! psi2 = "power:1,2"
//! eta = "power:1,2"
//! rho = "linear:2"
//! alpha = "linear:2"
//! psi3 = "power:2,2"
//!
//! [run]
//! horizon = 5.0
//! step = 1e-3
//! x0 = [1.0]
//! ```
//!
//! A file may instead name a built-in (`builtin = "heat"`) and override only
//! `input` and `run`. Function specs: `id`, `linear:a`, `power:c,p`,
//! `exp:c,k` (`c(e^{ks} − 1)`) and `table:<csv path>` (relative to the
//! config file). Rates additionally accept negative coefficients.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use impulsive_iss_core::construct::Regime;
use impulsive_iss_core::lyapunov::CandidateRates;
use impulsive_iss_core::scenarios::{self, rotation2d_lyapunov, ConstructionHint};
use impulsive_iss_core::{
    CandidateLyapunov, ComparisonFunction, HeatJump, HeatParams, ImpulseSequence, ImpulsiveSystem, InputSignal, Rate,
    Scenario,
};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    At { path: String, message: String },
    #[error("cannot read {file}: {source}")]
    Io { file: PathBuf, source: std::io::Error },
    #[error("{file}: {message}")]
    Parse { file: PathBuf, message: String },
}

fn at(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::At { path: path.into(), message: message.into() }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    label: Option<String>,
    builtin: Option<String>,
    system: Option<RawSystem>,
    input: Option<RawInput>,
    lyapunov: Option<RawLyapunov>,
    candidate: Option<RawCandidate>,
    construction: Option<RawConstruction>,
    run: Option<RawRun>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    dim: Option<usize>,
    grid: Option<RawGrid>,
    flow: RawFlow,
    jump: RawJump,
    impulses: RawImpulses,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nodes: usize,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawFlow {
    /// `ẋ = Ax + b·u`.
    Linear { a: Vec<Vec<f64>>, b: Option<Vec<f64>> },
    /// `ẋ = diffusion·x_yy + gain·x` on `[−1, 1]`.
    Heat { diffusion: f64, gain: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawJump {
    /// `x⁺ = Ax⁻ + b·u⁻`.
    Linear {
        a: Vec<Vec<f64>>,
        b: Option<Vec<f64>>,
    },
    /// `x⁺ₖ = gainsₖ·x⁻ₖ + input_tanhₖ·u⁻·tanh(x⁻ₖ)`.
    Diagonal {
        gains: Vec<f64>,
        input_tanh: Option<Vec<f64>>,
    },
    Heat {
        profile: Option<String>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImpulses {
    #[serde(default)]
    origin: f64,
    periodic: Option<f64>,
    list: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    kind: String,
    #[serde(default)]
    level: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLyapunov {
    form: String,
    #[serde(default)]
    params: BTreeMap<String, toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCandidate {
    value: String,
    matrix: Option<Vec<Vec<f64>>>,
    psi1: String,
    psi2: String,
    eta: String,
    rho: String,
    alpha: String,
    psi3: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstruction {
    regime: String,
    theta: f64,
    delta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    horizon: Option<f64>,
    step: Option<f64>,
    x0: Option<Vec<f64>>,
    /// Also verify from `x0` restarted at every impulse time.
    #[serde(default)]
    restart_at_impulses: bool,
}

/// A scenario from a built-in name or a TOML file path.
pub fn resolve(arg: &str) -> Result<Scenario> {
    if let Some(sc) = scenarios::builtin(arg) {
        return sc.map_err(|e| at("builtin", e.to_string()));
    }
    load_scenario_file(Path::new(arg))
}

pub fn load_scenario_file(file: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(file).map_err(|source| ConfigError::Io { file: file.to_path_buf(), source })?;
    let base = file.parent().unwrap_or(Path::new("."));
    load_scenario(&text, base).map_err(|e| match e {
        ConfigError::Parse { message, .. } => ConfigError::Parse { file: file.to_path_buf(), message },
        other => other,
    })
}

/// Parses a scenario; `table:` paths resolve against `base`.
pub fn load_scenario(text: &str, base: &Path) -> Result<Scenario> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| ConfigError::Parse { file: PathBuf::from("<config>"), message: e.to_string() })?;

    let mut sc = match (&raw.builtin, &raw.system) {
        (Some(_), Some(_)) => return Err(at("system", "not allowed together with builtin")),
        (Some(name), None) => {
            if raw.lyapunov.is_some() || raw.candidate.is_some() {
                return Err(at("builtin", "built-in scenarios carry their own Lyapunov data"));
            }
            scenarios::builtin(name)
                .ok_or_else(|| {
                    at("builtin", format!("unknown built-in {name:?}; known: {:?}", scenarios::BUILTIN_NAMES))
                })?
                .map_err(|e| at("builtin", e.to_string()))?
        }
        (None, Some(sys)) => build_from_system(&raw, sys, base)?,
        (None, None) => return Err(at("system", "missing (or give builtin)")),
    };

    if let Some(label) = &raw.label {
        sc.label = label.clone();
    }
    if raw.builtin.is_some() {
        if let Some(input) = &raw.input {
            sc.input = parse_input(input)?;
        }
        if let Some(run) = &raw.run {
            if let Some(h) = run.horizon {
                sc.horizon = positive(h, "run.horizon")?;
            }
            if let Some(s) = run.step {
                sc.step = positive(s, "run.step")?;
            }
            if let Some(x0) = &run.x0 {
                sc = sc.with_x0(x0.clone()).map_err(|e| at("run.x0", e.to_string()))?;
            }
        }
    }
    if let Some(c) = &raw.construction {
        let regime = Regime::parse(&c.regime)
            .ok_or_else(|| at("construction.regime", format!("expected sfuj or ufsj, got {:?}", c.regime)))?;
        sc.construction = Some(ConstructionHint { regime, theta: c.theta, delta: c.delta });
    }
    if raw.run.as_ref().is_some_and(|r| r.restart_at_impulses) {
        let x0 = sc.x0.clone();
        sc.extra_starts =
            sc.system.impulses().impulses_in(sc.t0(), sc.horizon).into_iter().map(|(_, t)| (t, x0.clone())).collect();
    }
    Ok(sc)
}

fn positive(v: f64, path: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(at(path, format!("must be positive, got {v}")))
    }
}

fn build_from_system(raw: &RawConfig, sys: &RawSystem, base: &Path) -> Result<Scenario> {
    let run = raw.run.as_ref().ok_or_else(|| at("run", "missing"))?;
    let horizon = positive(run.horizon.ok_or_else(|| at("run.horizon", "missing"))?, "run.horizon")?;
    let step = positive(run.step.ok_or_else(|| at("run.step", "missing"))?, "run.step")?;
    let input = match &raw.input {
        Some(i) => parse_input(i)?,
        None => InputSignal::zero(),
    };
    let impulses = parse_impulses(&sys.impulses)?;

    let mut sc = if let RawFlow::Heat { diffusion, gain } = sys.flow {
        heat_scenario(raw, sys, diffusion, gain, &input, horizon, step)?
    } else {
        let dim = sys.dim.ok_or_else(|| at("system.dim", "missing"))?;
        if dim == 0 {
            return Err(at("system.dim", "must be at least 1"));
        }
        if sys.grid.is_some() {
            return Err(at("system.grid", "only the heat flow uses a grid"));
        }
        let system = build_system(sys, dim, impulses)?;
        let x0 = run.x0.clone().ok_or_else(|| at("run.x0", "missing"))?;
        if x0.len() != dim {
            return Err(at("run.x0", format!("dimension mismatch: length {} but system.dim = {dim}", x0.len())));
        }
        let label = raw.label.clone().unwrap_or_else(|| "scenario".into());
        let mut sc =
            Scenario::new(label, system, input.clone(), x0, horizon, step).map_err(|e| at("run.x0", e.to_string()))?;
        sc.lyapunov = match &raw.lyapunov {
            None => None,
            Some(l) => Some(parse_lyapunov(l, &sc)?),
        };
        sc
    };

    if let Some(c) = &raw.candidate {
        sc.candidate = Some(parse_candidate(c, sc.system.dim(), base)?);
    }
    Ok(sc)
}

fn heat_scenario(
    raw: &RawConfig,
    sys: &RawSystem,
    diffusion: f64,
    gain: f64,
    input: &InputSignal,
    horizon: f64,
    step: f64,
) -> Result<Scenario> {
    let nodes = sys.grid.as_ref().ok_or_else(|| at("system.grid.nodes", "missing for the heat flow"))?.nodes;
    if let Some(d) = sys.dim {
        if d != nodes {
            return Err(at("system.dim", format!("dimension mismatch: {d} but grid has {nodes} nodes")));
        }
    }
    let jump = match &sys.jump {
        RawJump::Heat { profile } => parse_heat_profile(profile.as_deref())?,
        _ => return Err(at("system.jump.kind", "the heat flow requires the heat jump")),
    };
    let period = match sys.impulses.periodic {
        Some(p) if sys.impulses.origin == 0.0 && sys.impulses.list.is_none() => p,
        _ => return Err(at("system.impulses", "the heat flow needs periodic impulses from origin 0")),
    };
    let params = HeatParams { a: diffusion, f_gain: gain, u_level: input.sup_norm(), period, horizon, step, jump };
    let mut sc = scenarios::scenario_heat(nodes, params).map_err(|e| at("system", e.to_string()))?;
    sc.input = input.clone();
    match raw.lyapunov.as_ref().map(|l| l.form.as_str()) {
        None => sc.lyapunov = None,
        Some("heat") => {}
        Some(other) => return Err(at("lyapunov.form", format!("{other:?} does not apply to the heat flow"))),
    }
    if let Some(x0) = raw.run.as_ref().and_then(|r| r.x0.clone()) {
        sc = sc.with_x0(x0).map_err(|e| at("run.x0", format!("dimension mismatch: {e}")))?;
    }
    Ok(sc)
}

fn parse_heat_profile(name: Option<&str>) -> Result<HeatJump> {
    match name.unwrap_or("uniform") {
        "uniform" => Ok(HeatJump::Uniform),
        "bump" => Ok(HeatJump::Bump),
        "scaled-cap" => Ok(HeatJump::ScaledCap),
        other => Err(at("system.jump.profile", format!("unknown profile {other:?}"))),
    }
}

fn parse_input(i: &RawInput) -> Result<InputSignal> {
    match i.kind.as_str() {
        "zero" => Ok(InputSignal::zero()),
        "constant" => Ok(InputSignal::constant(i.level)),
        other => Err(at("input.kind", format!("unknown input kind {other:?}"))),
    }
}

fn parse_impulses(i: &RawImpulses) -> Result<ImpulseSequence> {
    match (i.periodic, &i.list) {
        (Some(p), None) => {
            ImpulseSequence::periodic(i.origin, p).map_err(|e| at("system.impulses.periodic", e.to_string()))
        }
        (None, Some(l)) => {
            ImpulseSequence::explicit(i.origin, l.clone()).map_err(|e| at("system.impulses.list", e.to_string()))
        }
        _ => Err(at("system.impulses", "give exactly one of periodic or list")),
    }
}

fn check_matrix(a: &[Vec<f64>], dim: usize, path: &str) -> Result<()> {
    if a.len() != dim || a.iter().any(|row| row.len() != dim) {
        return Err(at(path, format!("dimension mismatch: expected a {dim}x{dim} matrix")));
    }
    Ok(())
}

fn check_vector(b: &Option<Vec<f64>>, dim: usize, path: &str) -> Result<Vec<f64>> {
    match b {
        None => Ok(vec![0.0; dim]),
        Some(b) if b.len() == dim => Ok(b.clone()),
        Some(b) => Err(at(path, format!("dimension mismatch: length {} but system.dim = {dim}", b.len()))),
    }
}

fn build_system(sys: &RawSystem, dim: usize, impulses: ImpulseSequence) -> Result<ImpulsiveSystem> {
    let RawFlow::Linear { a, b } = &sys.flow else { unreachable!("heat handled by the caller") };
    check_matrix(a, dim, "system.flow.a")?;
    let fb = check_vector(b, dim, "system.flow.b")?;
    let fa: Vec<f64> = a.iter().flatten().copied().collect();
    let flow = move |_: f64, x: &[f64], u: f64, dx: &mut [f64]| {
        for (r, d) in dx.iter_mut().enumerate() {
            *d = fa[r * dim..(r + 1) * dim].iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + fb[r] * u;
        }
    };
    let system = match &sys.jump {
        RawJump::Linear { a, b } => {
            check_matrix(a, dim, "system.jump.a")?;
            let jb = check_vector(b, dim, "system.jump.b")?;
            let ja: Vec<f64> = a.iter().flatten().copied().collect();
            ImpulsiveSystem::new("linear", dim, impulses, flow, move |_, x, u, out| {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = ja[r * dim..(r + 1) * dim].iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + jb[r] * u;
                }
            })
        }
        RawJump::Diagonal { gains, input_tanh } => {
            if gains.len() != dim {
                return Err(at(
                    "system.jump.gains",
                    format!("dimension mismatch: length {} but system.dim = {dim}", gains.len()),
                ));
            }
            let gains = gains.clone();
            let coupling = check_vector(input_tanh, dim, "system.jump.input_tanh")?;
            ImpulsiveSystem::new("diagonal", dim, impulses, flow, move |_, x, u, out| {
                for k in 0..out.len() {
                    out[k] = gains[k] * x[k] + coupling[k] * u * x[k].tanh();
                }
            })
        }
        RawJump::Heat { .. } => return Err(at("system.jump.kind", "the heat jump requires the heat flow")),
    };
    Ok(system)
}

fn parse_lyapunov(l: &RawLyapunov, sc: &Scenario) -> Result<impulsive_iss_core::TimeVaryingLyapunov> {
    match l.form.as_str() {
        "rotation2d" => {
            if sc.system.dim() != 2 {
                return Err(at("lyapunov.form", "rotation2d needs a two-dimensional system"));
            }
            let discount = match l.params.get("discount") {
                None => true,
                Some(toml::Value::Boolean(b)) => *b,
                Some(_) => return Err(at("lyapunov.params.discount", "expected a boolean")),
            };
            Ok(rotation2d_lyapunov(sc.system.impulses().clone(), discount))
        }
        "heat" => Err(at("lyapunov.form", "heat needs the heat flow")),
        other => Err(at("lyapunov.form", format!("unknown form {other:?}; known: heat, rotation2d"))),
    }
}

fn parse_candidate(c: &RawCandidate, dim: usize, base: &Path) -> Result<CandidateLyapunov> {
    if c.value != "quadratic" {
        return Err(at("candidate.value", format!("unknown value form {:?}; known: quadratic", c.value)));
    }
    let m: Vec<f64> = match &c.matrix {
        None => (0..dim * dim).map(|k| if k / dim == k % dim { 1.0 } else { 0.0 }).collect(),
        Some(m) => {
            check_matrix(m, dim, "candidate.matrix")?;
            m.iter().flatten().copied().collect()
        }
    };
    let rates = CandidateRates {
        psi1: parse_comparison(&c.psi1, base, "candidate.psi1")?,
        psi2: parse_comparison(&c.psi2, base, "candidate.psi2")?,
        eta: parse_comparison(&c.eta, base, "candidate.eta")?,
        rho: parse_rate(&c.rho, "candidate.rho")?,
        alpha: parse_comparison(&c.alpha, base, "candidate.alpha")?,
        psi3: parse_comparison(&c.psi3, base, "candidate.psi3")?,
    };
    Ok(CandidateLyapunov::new("quadratic", rates, move |x| {
        let n = x.len();
        (0..n).map(|r| x[r] * (0..n).map(|s| m[r * n + s] * x[s]).sum::<f64>()).sum()
    }))
}

fn numbers(args: &str, n: usize, path: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = args
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| at(path, format!("bad number in {args:?}: {e}")))?;
    if v.len() != n {
        return Err(at(path, format!("expected {n} numbers, got {}", v.len())));
    }
    Ok(v)
}

/// Resolves a named comparison function.
pub fn parse_comparison(spec: &str, base: &Path, path: &str) -> Result<ComparisonFunction> {
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    let f = match name {
        "id" => ComparisonFunction::identity(),
        "linear" => ComparisonFunction::linear(numbers(args, 1, path)?[0]),
        "power" => {
            let v = numbers(args, 2, path)?;
            ComparisonFunction::power(v[0], v[1])
        }
        "exp" => {
            let v = numbers(args, 2, path)?;
            ComparisonFunction::exp_minus_one(v[0], v[1])
        }
        "table" => load_table(&base.join(args), path)?,
        other => return Err(at(path, format!("unknown function name {other:?}"))),
    };
    Ok(f)
}

/// Resolves a flow rate: `linear:a` (`a·s`) or `power:c,p` (`c·s^p`).
pub fn parse_rate(spec: &str, path: &str) -> Result<Rate> {
    let (name, args) = spec.split_once(':').unwrap_or((spec, ""));
    match name {
        "linear" => Ok(Rate::linear(numbers(args, 1, path)?[0])),
        "power" => {
            let v = numbers(args, 2, path)?;
            let (c, p) = (v[0], v[1]);
            Ok(Rate::new(spec.to_string(), move |s: f64| c * s.powf(p)))
        }
        other => Err(at(path, format!("unknown rate name {other:?}"))),
    }
}

fn load_table(file: &Path, path: &str) -> Result<ComparisonFunction> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(file)
        .map_err(|e| at(path, format!("{}: {e}", file.display())))?;
    let mut knots = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| at(path, format!("{}: {e}", file.display())))?;
        let parsed = (rec.get(0).map(str::parse::<f64>), rec.get(1).map(str::parse::<f64>));
        match parsed {
            (Some(Ok(s)), Some(Ok(y))) => knots.push((s, y)),
            _ if k == 0 => continue, // header
            _ => return Err(at(path, format!("{}: row {} is not two numbers", file.display(), k + 1))),
        }
    }
    ComparisonFunction::table(file.display().to_string(), knots).map_err(|e| at(path, e.to_string()))
}
