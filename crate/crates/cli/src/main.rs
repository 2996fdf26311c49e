//! `cdrive`: run counter-diabatic driving experiments from JSON configs.
//!
//! Exit status: 0 all assertions passed, 1 an assertion failed, 2 invalid
//! config or arguments, 3 numerical failure (diagnostics in `report.json`).

mod config;
mod experiment;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use config::{Assertion, ConfigError, ExperimentConfig, Prepared};
use report::{
    evaluate, write_json, CompareReport, Diagnostic, Gaps, RunReport, Status, SweepReport, SweepRow, Trends,
    SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(name = "cdrive", version, about = "Counter-diabatic driving experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides `numerics.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Also run the generator and commutator residual suites.
    #[arg(long)]
    verify: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    #[value(name = "T")]
    Duration,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment as configured.
    Run(Common),
    /// Run with and without the counter-diabatic term and compare.
    Compare(Common),
    /// Repeat both arms over a list of durations.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Durations, comma separated and ascending.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
}

#[derive(Serialize)]
struct FailureReport {
    schema_version: &'static str,
    command: &'static str,
    status: Status,
    error: Diagnostic,
}

struct Failure {
    status: Status,
    error: Diagnostic,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure { status: Status::InvalidConfig, error: Diagnostic { kind: "config".into(), message: e.to_string() } }
    }
}

impl From<cdrive_core::Error> for Failure {
    fn from(e: cdrive_core::Error) -> Self {
        let kind = match &e {
            cdrive_core::Error::Domain(_) => "domain",
            cdrive_core::Error::Precondition(_) => "precondition",
            cdrive_core::Error::Numerical { .. } => "numerical",
            cdrive_core::Error::Degenerate(_) => "degenerate",
            cdrive_core::Error::Logic(_) => "logic",
        };
        Failure { status: Status::NumericalFailure, error: Diagnostic { kind: kind.into(), message: e.to_string() } }
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure { status: Status::NumericalFailure, error: Diagnostic { kind: "io".into(), message: e.to_string() } }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { status: Status::InvalidConfig, error: Diagnostic { kind: "config".into(), message: message.into() } }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.numerics.seed = seed;
    }
    let out = common.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("cdrive-out"));
    Ok((cfg, out))
}

/// Validate a compare or sweep config. Its assertions may name an aggregate
/// from `names` or an arm metric prefixed with `on.` or `off.`; the returned
/// arm template carries none.
fn prepare_paired(common: &Common, names: &[&str]) -> Result<(Prepared, Vec<Assertion>, PathBuf), Failure> {
    let (mut cfg, out) = load(common)?;
    let assertions = std::mem::take(&mut cfg.assertions);
    let arm = Prepared::new(cfg)?;
    for a in &assertions {
        let known = match a.metric.strip_prefix("on.").or_else(|| a.metric.strip_prefix("off.")) {
            Some(m) => arm.config.experiment.metrics().contains(&m),
            None => names.contains(&a.metric.as_str()),
        };
        if !known {
            return Err(invalid(format!("assertion on unknown metric '{}'", a.metric)));
        }
    }
    Ok((arm, assertions, out))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(io_failure)
}

fn kind_name(p: &Prepared) -> String {
    serde_json::to_value(p.config.experiment).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn run_report(p: &Prepared, dir: Option<&Path>, verify: bool) -> Result<RunReport, Failure> {
    let o = experiment::run(p, dir, verify)?;
    let assertions = evaluate(&p.config.assertions, &o.metrics);
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        command: "run",
        experiment: kind_name(p),
        system: p.system.tag(),
        schedule: p.schedule.tag(),
        duration: o.duration,
        cd_enabled: p.config.cd_enabled,
        seed: p.config.numerics.seed,
        status: Status::from_outcomes(&assertions),
        metrics: o.metrics,
        convergence: o.convergence,
        assertions,
        artifacts: o.artifacts,
        error: None,
    })
}

fn cmd_run(common: &Common) -> Result<Status, Failure> {
    let (cfg, out) = load(common)?;
    let p = Prepared::new(cfg)?;
    create_dir(&out)?;
    let report = run_report(&p, Some(&out), common.verify)?;
    write_json(&out.join("report.json"), &report).map_err(io_failure)?;
    Ok(report.status)
}

fn cmd_compare(common: &Common) -> Result<Status, Failure> {
    let (base, assertions, out) = prepare_paired(common, Gaps::NAMES)?;
    let (on_dir, off_dir) = (out.join("on"), out.join("off"));
    create_dir(&on_dir)?;
    create_dir(&off_dir)?;
    let (on, off) = rayon::join(
        || run_report(&base.with_cd(true), Some(&on_dir), common.verify),
        || run_report(&base.with_cd(false), Some(&off_dir), common.verify),
    );
    let (mut on, mut off) = (on?, off?);
    on.command = "compare";
    off.command = "compare";
    write_json(&on_dir.join("report.json"), &on).map_err(io_failure)?;
    write_json(&off_dir.join("report.json"), &off).map_err(io_failure)?;
    let gaps = Gaps::between(&on.metrics, &off.metrics);
    let record = serde_json::json!({
        "on": serde_json::to_value(&on.metrics).unwrap_or_default(),
        "off": serde_json::to_value(&off.metrics).unwrap_or_default(),
    });
    let mut merged = serde_json::to_value(&gaps).unwrap_or_default();
    if let (Some(m), Some(r)) = (merged.as_object_mut(), record.as_object()) {
        m.extend(r.clone());
    }
    let outcomes = evaluate(&assertions, &merged);
    let report = CompareReport {
        schema_version: SCHEMA_VERSION,
        command: "compare",
        experiment: on.experiment.clone(),
        seed: base.config.numerics.seed,
        status: Status::from_outcomes(&outcomes),
        on,
        off,
        gaps,
        assertions: outcomes,
    };
    write_json(&out.join("report.json"), &report).map_err(io_failure)?;
    Ok(report.status)
}

fn parse_values(values: &[String]) -> Result<Vec<f64>, Failure> {
    let parsed: Vec<f64> = values
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| invalid(format!("'{s}' is not a number"))))
        .collect::<Result<_, _>>()?;
    if parsed.is_empty() {
        return Err(invalid("sweep needs at least one value"));
    }
    if !parsed.iter().all(|v| *v > 0.0 && v.is_finite()) || !parsed.windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid("sweep values must be positive and strictly ascending"));
    }
    Ok(parsed)
}

fn cmd_sweep(common: &Common, values: &[String]) -> Result<Status, Failure> {
    let durations = parse_values(values)?;
    let (base, assertions, out) = prepare_paired(common, Trends::NAMES)?;
    let arms: Vec<(Prepared, Prepared)> = durations
        .iter()
        .map(|&t| {
            let q = base.with_duration(t)?;
            Ok((q.with_cd(false), q.with_cd(true)))
        })
        .collect::<Result<_, ConfigError>>()?;
    let results: Vec<Result<SweepRow, Failure>> = arms
        .par_iter()
        .map(|(off, on)| {
            let (a, b) = rayon::join(
                || experiment::run(off, None, common.verify),
                || experiment::run(on, None, common.verify),
            );
            let (a, b) = (a?, b?);
            Ok(SweepRow { duration: a.duration, off: a.metrics, on: b.metrics })
        })
        .collect();
    let rows: Vec<SweepRow> = results.into_iter().collect::<Result<_, _>>()?;
    create_dir(&out)?;
    write_sweep_csv(&out.join("sweep.csv"), &rows).map_err(io_failure)?;
    let trends = Trends::of(&rows);
    let outcomes = evaluate(&assertions, &trends);
    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        command: "sweep",
        experiment: kind_name(&base),
        axis: "T",
        seed: base.config.numerics.seed,
        rows,
        status: Status::from_outcomes(&outcomes),
        trends,
        assertions: outcomes,
    };
    write_json(&out.join("report.json"), &report).map_err(io_failure)?;
    Ok(report.status)
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> std::io::Result<()> {
    use std::io::Write;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "T,dissipation_off,fidelity_deficit_off,omega_drift_off,dissipation_on,fidelity_deficit_on,omega_drift_on")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.duration,
            cell(r.off.dissipation),
            cell(r.off.fidelity_deficit),
            cell(r.off.omega_drift),
            cell(r.on.dissipation),
            cell(r.on.fidelity_deficit),
            cell(r.on.omega_drift)
        )?;
    }
    w.flush()
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CDRIVE_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| invalid(format!("CDRIVE_THREADS='{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| invalid(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Run(c) => ("run", c),
        Command::Compare(c) => ("compare", c),
        Command::Sweep { common, .. } => ("sweep", common),
    };
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Compare(c) => cmd_compare(c),
        Command::Sweep { common, axis: Axis::Duration, values } => cmd_sweep(common, values),
    });
    let status = match result {
        Ok(s) => s,
        Err(f) => {
            eprintln!("cdrive {name}: {}: {}", f.error.kind, f.error.message);
            if f.status == Status::NumericalFailure {
                let out = common.out.clone().unwrap_or_else(|| PathBuf::from("cdrive-out"));
                let report = FailureReport { schema_version: SCHEMA_VERSION, command: name, status: f.status, error: f.error };
                if std::fs::create_dir_all(&out).is_ok() {
                    let _ = write_json(&out.join("report.json"), &report);
                }
            }
            f.status
        }
    };
    ExitCode::from(status.exit_code() as u8)
}
