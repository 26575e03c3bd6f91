//! Subcommands and exit codes.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use impulsive_iss_core::construct::{check_dwell, construct_sfuj, construct_ufsj, ConstructionResult};
use impulsive_iss_core::lyapunov::{check_iss_estimates, verify_definition2, verify_definition3, VerificationReport};
use impulsive_iss_core::scenarios::rotation2d_lyapunov;
use impulsive_iss_core::transform::{build_iss_gains, build_transform, DEFAULT_QUAD_TOL};
use impulsive_iss_core::{DwellParams, Error as CoreError, Rate, Regime, Scenario, TimeVaryingLyapunov, VerifyOptions};
use serde_json::{json, Value};

use crate::config::{self, ConfigError};
use crate::output::{self, num, ValueSource};
use crate::sweep::{self, Range};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    VerificationFailed = 1,
    BlowUp = 2,
    ConfigError = 3,
    PreconditionFailed = 4,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s.code())
    }
}

#[derive(Debug, Parser)]
#[command(name = "impulsive-iss", version, about = "ISS-Lyapunov analysis of impulsive systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write trajectory.csv.
    Simulate(RunArgs),
    /// Check a Lyapunov function or ISS estimate along simulated trajectories.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Which::Def3)]
        which: Which,
        /// Replace the rotation example's V by the variant without its time discount.
        #[arg(long)]
        drop_discount: bool,
    },
    /// Build a time-varying Lyapunov function from a candidate and verify it.
    Construct {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Dwell-condition pass/fail over a (theta, delta) grid.
    Sweep {
        #[arg(long, value_enum)]
        regime: RegimeArg,
        /// Flow rate, e.g. `linear:1` or `power:1,0.5`.
        #[arg(long)]
        rho: String,
        /// Jump gain, e.g. `linear:2`.
        #[arg(long)]
        alpha: String,
        /// `lo:hi:n` or a single value.
        #[arg(long)]
        theta: String,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Built-in name or path to a TOML scenario file.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Def1,
    Def2,
    Def3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Sfuj,
    Ufsj,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Sfuj => Regime::Sfuj,
            RegimeArg::Ufsj => Regime::Ufsj,
        }
    }
}

/// A failure that ends a command with a specific status.
#[derive(Debug)]
struct Failure {
    status: Status,
    message: String,
    detail: Value,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { status: Status::ConfigError, message: message.into(), detail: Value::Null }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let status = match e {
            CoreError::BlowUp { .. } => Status::BlowUp,
            CoreError::Precondition(_) | CoreError::Sequence(_) => Status::PreconditionFailed,
            _ => Status::ConfigError,
        };
        let detail = match e {
            CoreError::BlowUp { last_finite_time } => json!({ "last_finite_time": num(last_finite_time) }),
            _ => Value::Null,
        };
        Failure { status, message: e.to_string(), detail }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::config(format!("{e:#}"))
    }
}

/// Runs a parsed command line; every command writes `manifest.json`.
pub fn run(cli: &Cli) -> Status {
    let (out, mut manifest) = manifest_for(&cli.command);
    let result = output::ensure_dir(out).map_err(Failure::from).and_then(|_| dispatch(&cli.command, out));
    let status = match result {
        Ok(s) => s,
        Err(f) => {
            eprintln!("error: {}", f.message);
            manifest["error"] = json!(f.message);
            if !f.detail.is_null() {
                manifest["detail"] = f.detail;
            }
            f.status
        }
    };
    manifest["exit_code"] = json!(status.code());
    if out.is_dir() {
        if let Err(e) = output::write_json(&out.join("manifest.json"), &manifest) {
            eprintln!("error: cannot write manifest: {e:#}");
        }
    }
    status
}

fn manifest_for(cmd: &Command) -> (&Path, Value) {
    let base = |name: &str, out: &Path| {
        json!({
            "command": name,
            "out_dir": out.display().to_string(),
            "deterministic": true,
            "tool_version": env!("CARGO_PKG_VERSION"),
        })
    };
    let run_fields = |m: &mut Value, r: &RunArgs| {
        m["scenario"] = json!(r.scenario);
        m["step"] = json!(r.step);
        m["horizon"] = json!(r.horizon);
    };
    match cmd {
        Command::Simulate(r) => {
            let mut m = base("simulate", &r.out);
            run_fields(&mut m, r);
            (&r.out, m)
        }
        Command::Verify { run, which, drop_discount } => {
            let mut m = base("verify", &run.out);
            run_fields(&mut m, run);
            m["which"] = json!(format!("{which:?}").to_lowercase());
            m["drop_discount"] = json!(drop_discount);
            (&run.out, m)
        }
        Command::Construct { run, regime, theta, delta } => {
            let mut m = base("construct", &run.out);
            run_fields(&mut m, run);
            m["regime"] = json!(regime.map(|r| Regime::from(r).name()));
            m["theta"] = json!(theta);
            m["delta"] = json!(delta);
            (&run.out, m)
        }
        Command::Sweep { regime, rho, alpha, theta, delta, out } => {
            let mut m = base("sweep", out);
            m["regime"] = json!(Regime::from(*regime).name());
            m["rho"] = json!(rho);
            m["alpha"] = json!(alpha);
            m["theta"] = json!(theta);
            m["delta"] = json!(delta);
            (out, m)
        }
    }
}

fn dispatch(cmd: &Command, out: &Path) -> Result<Status, Failure> {
    match cmd {
        Command::Simulate(r) => cmd_simulate(&load(r)?, out),
        Command::Verify { run, which, drop_discount } => cmd_verify(load(run)?, *which, *drop_discount, out),
        Command::Construct { run, regime, theta, delta } => {
            cmd_construct(&load(run)?, regime.map(Regime::from), *theta, *delta, out)
        }
        Command::Sweep { regime, rho, alpha, theta, delta, .. } => {
            let theta = Range::parse(theta).map_err(Failure::config)?;
            let delta = Range::parse(delta).map_err(Failure::config)?;
            let rho = config::parse_rate(rho, "--rho")?;
            let alpha = config::parse_comparison(alpha, Path::new("."), "--alpha")?;
            let rows = sweep::dwell_region((*regime).into(), &rho, &alpha, &theta, &delta)?;
            output::write_region_csv(&out.join("region.csv"), &rows)?;
            Ok(Status::Pass)
        }
    }
}

/// Loads the scenario and applies `--step` / `--horizon`.
fn load(r: &RunArgs) -> Result<Scenario, Failure> {
    let mut sc = config::resolve(&r.scenario)?;
    if let Some(step) = r.step {
        if !(step > 0.0) {
            return Err(Failure::config(format!("--step must be positive, got {step}")));
        }
        sc = sc.with_step(step);
    }
    if let Some(h) = r.horizon {
        if !(h > sc.t0()) {
            return Err(Failure::config(format!("--horizon must exceed the start time {}, got {h}", sc.t0())));
        }
        let restarts = !sc.extra_starts.is_empty();
        sc = sc.with_horizon(h);
        if restarts {
            let x0 = sc.x0.clone();
            sc.extra_starts =
                sc.system.impulses().impulses_in(sc.t0(), h).into_iter().map(|(_, t)| (t, x0.clone())).collect();
        }
    }
    Ok(sc)
}

fn value_source(sc: &Scenario) -> ValueSource<'_> {
    match (&sc.lyapunov, &sc.candidate) {
        (Some(v), _) => ValueSource::TimeVarying(v),
        (None, Some(c)) => ValueSource::Candidate(c),
        _ => ValueSource::None,
    }
}

fn cmd_simulate(sc: &Scenario, out: &Path) -> Result<Status, Failure> {
    let traj = sc.simulate()?;
    output::write_trajectory_csv(&out.join("trajectory.csv"), &traj, &value_source(sc))?;
    Ok(Status::Pass)
}

fn construct(
    sc: &Scenario,
    regime: Regime,
    theta: f64,
    delta: f64,
) -> Result<(DwellParams, ConstructionResult), Failure> {
    let c = sc.candidate.as_ref().ok_or_else(|| Failure::config("scenario has no candidate function"))?;
    let p = DwellParams::from_candidate(c, theta, delta)?;
    let built = match regime {
        Regime::Sfuj => construct_sfuj(c, &p, sc.system.impulses(), None)?,
        Regime::Ufsj => construct_ufsj(c, &p, sc.system.impulses())?,
    };
    Ok((p, built))
}

/// The scenario's V, or one built from its candidate and construction hint.
fn lyapunov_of(sc: &Scenario) -> Result<TimeVaryingLyapunov, Failure> {
    if let Some(v) = &sc.lyapunov {
        return Ok(v.clone());
    }
    match (&sc.candidate, &sc.construction) {
        (Some(_), Some(h)) => Ok(construct(sc, h.regime, h.theta, h.delta)?.1.lyapunov),
        _ => Err(Failure::config("scenario has no time-varying Lyapunov function and no construction settings")),
    }
}

fn iss_report(
    v: &TimeVaryingLyapunov,
    trajs: &[impulsive_iss_core::Trajectory],
) -> Result<VerificationReport, Failure> {
    let bt = build_transform(Rate::from(&v.phi), DEFAULT_QUAD_TOL)?.beta_tilde_kl();
    let gains = build_iss_gains(&v.alpha1, &v.alpha2, &v.alpha3, &v.chi, &bt)?;
    Ok(check_iss_estimates(trajs, &gains, &VerifyOptions::default()))
}

fn verdict(passed: bool) -> Status {
    if passed {
        Status::Pass
    } else {
        Status::VerificationFailed
    }
}

fn cmd_verify(mut sc: Scenario, which: Which, drop_discount: bool, out: &Path) -> Result<Status, Failure> {
    if drop_discount {
        match &sc.lyapunov {
            Some(v) if v.label().starts_with("rotation2d") => {
                sc.lyapunov = Some(rotation2d_lyapunov(sc.system.impulses().clone(), false));
            }
            _ => return Err(Failure::config("--drop-discount applies only to the rotation2d Lyapunov function")),
        }
    }
    let trajs = sc.verification_trajectories()?;
    let u_sup = sc.input.sup_norm();
    let opts = VerifyOptions::default();
    let (report, source_v, level) = match which {
        Which::Def2 => {
            let c = sc.candidate.as_ref().ok_or_else(|| Failure::config("scenario has no candidate function"))?;
            (verify_definition2(c, &trajs, &opts), None, c.eta.apply(u_sup))
        }
        Which::Def3 => {
            let v = lyapunov_of(&sc)?;
            let level = v.chi.apply(u_sup);
            (verify_definition3(&v, &trajs, &opts), Some(v), level)
        }
        Which::Def1 => {
            let v = lyapunov_of(&sc)?;
            let level = v.chi.apply(u_sup);
            (iss_report(&v, &trajs)?, Some(v), level)
        }
    };
    let name = format!("{which:?}").to_lowercase();
    output::write_json(&out.join("report.json"), &output::report_json(&name, &report))?;
    let source = match (&source_v, &sc.candidate) {
        (Some(v), _) => ValueSource::TimeVarying(v),
        (None, Some(c)) => ValueSource::Candidate(c),
        _ => ValueSource::None,
    };
    output::write_lyapunov_csv(&out.join("lyapunov.csv"), &trajs[0], &source, level)?;
    for f in report.failures().take(5) {
        eprintln!("fail: {} t={} margin={:e}", f.condition, f.t, f.margin);
    }
    Ok(verdict(report.passed))
}

fn cmd_construct(
    sc: &Scenario,
    regime: Option<Regime>,
    theta: Option<f64>,
    delta: Option<f64>,
    out: &Path,
) -> Result<Status, Failure> {
    let hint = sc.construction;
    let regime = regime.or(hint.map(|h| h.regime)).ok_or_else(|| Failure::config("--regime is required"))?;
    let theta = theta.or(hint.map(|h| h.theta)).ok_or_else(|| Failure::config("--theta is required"))?;
    let delta = delta.or(hint.map(|h| h.delta)).ok_or_else(|| Failure::config("--delta is required"))?;
    let c = sc.candidate.as_ref().ok_or_else(|| Failure::config("scenario has no candidate function"))?;

    let p = DwellParams::from_candidate(c, theta, delta)?;
    let dwell = check_dwell(regime, &p)?;
    let report_path = out.join("report.json");
    let built = match construct(sc, regime, theta, delta) {
        Ok((_, b)) => b,
        Err(f) => {
            let doc = json!({
                "name": "construct",
                "pass": false,
                "dwell": output::dwell_json(&dwell),
                "error": f.message,
            });
            output::write_json(&report_path, &doc)?;
            return Err(f);
        }
    };
    output::write_json(&out.join("provenance.json"), &output::provenance_json(&built.provenance))?;

    let v = &built.lyapunov;
    let trajs = sc.verification_trajectories()?;
    let def3 = verify_definition3(v, &trajs, &VerifyOptions::default());
    let iss = iss_report(v, &trajs)?;
    let doc = json!({
        "name": "construct",
        "pass": def3.passed && iss.passed,
        "dwell": output::dwell_json(&dwell),
        "def3": output::report_json("def3", &def3),
        "def1": output::report_json("def1", &iss),
    });
    output::write_json(&report_path, &doc)?;
    output::write_lyapunov_csv(
        &out.join("lyapunov.csv"),
        &trajs[0],
        &ValueSource::TimeVarying(v),
        v.chi.apply(sc.input.sup_norm()),
    )?;
    Ok(verdict(def3.passed && iss.passed))
}
