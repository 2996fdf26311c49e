//! `report.json` layout. Field names are stable within a schema version; see
//! `schema/report.schema.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::{Assertion, Comparison};

pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, Default, Serialize)]
pub struct GeneratorResidual {
    pub energy: f64,
    pub bracket_residual: f64,
    pub average_residual: f64,
    pub points: usize,
}

/// Everything a run can measure; absent entries are omitted from the JSON.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_omega_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dissipation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collisions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_series: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ks: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_deficit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_norm_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leakage_warning: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator_residuals: Option<Vec<GeneratorResidual>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_bracket_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_average_residual: Option<f64>,
    /// Bracket residual of a generator with a deliberately wrong coefficient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_residual: Option<f64>,
    /// `max |ξ_numeric − μqp/L|` for smooth systems with a closed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commutator_residual: Option<f64>,
}

fn lookup(v: &Value, name: &str) -> Option<f64> {
    let mut cur = v;
    for part in name.split('.') {
        cur = cur.get(part)?;
    }
    cur.as_f64().or_else(|| cur.as_bool().map(|b| if b { 1.0 } else { 0.0 }))
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertionOutcome {
    pub metric: String,
    pub op: Comparison,
    pub threshold: f64,
    pub value: Option<f64>,
    pub passed: bool,
}

/// Evaluate assertions against any serializable record of named numbers.
pub fn evaluate<S: Serialize>(assertions: &[Assertion], record: &S) -> Vec<AssertionOutcome> {
    let v = serde_json::to_value(record).unwrap_or(Value::Null);
    assertions
        .iter()
        .map(|a| {
            let value = lookup(&v, &a.metric);
            AssertionOutcome {
                metric: a.metric.clone(),
                op: a.op,
                threshold: a.value,
                value,
                passed: value.is_some_and(|x| a.op.holds(x, a.value)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    AssertionFailed,
    InvalidConfig,
    NumericalFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Passed => 0,
            Status::AssertionFailed => 1,
            Status::InvalidConfig => 2,
            Status::NumericalFailure => 3,
        }
    }

    pub fn from_outcomes(outcomes: &[AssertionOutcome]) -> Self {
        if outcomes.iter().all(|o| o.passed) {
            Status::Passed
        } else {
            Status::AssertionFailed
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostic {
    pub kind: String,
    pub message: String,
}

/// A single experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub experiment: String,
    pub system: String,
    pub schedule: String,
    pub duration: f64,
    pub cd_enabled: bool,
    pub seed: u64,
    pub metrics: Metrics,
    pub convergence: BTreeMap<String, Value>,
    pub assertions: Vec<AssertionOutcome>,
    pub artifacts: Vec<String>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Diagnostic>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Gaps {
    /// `omega_drift(off) / omega_drift(on)`; absent when the on-arm drift is 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_drift_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dissipation_gap: Option<f64>,
    /// `final_fidelity(on) − final_fidelity(off)`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_gap: Option<f64>,
    /// `max_ks(off) − max_ks(on)`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_gap: Option<f64>,
    /// `min_fidelity(on)`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_on: Option<f64>,
    /// `final_fidelity(off)`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_off: Option<f64>,
}

impl Gaps {
    pub fn between(on: &Metrics, off: &Metrics) -> Self {
        let diff = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
        Gaps {
            drift_ratio: match (off.omega_drift, on.omega_drift) {
                (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                _ => None,
            },
            omega_drift_gap: diff(off.omega_drift, on.omega_drift),
            dissipation_gap: diff(off.dissipation, on.dissipation),
            fidelity_gap: diff(on.final_fidelity, off.final_fidelity),
            ks_gap: diff(off.max_ks, on.max_ks),
            fidelity_on: on.min_fidelity,
            fidelity_off: off.final_fidelity,
        }
    }

    pub const NAMES: &'static [&'static str] =
        &["drift_ratio", "omega_drift_gap", "dissipation_gap", "fidelity_gap", "ks_gap", "fidelity_on", "fidelity_off"];
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub experiment: String,
    pub seed: u64,
    pub on: RunReport,
    pub off: RunReport,
    pub gaps: Gaps,
    pub assertions: Vec<AssertionOutcome>,
    pub status: Status,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub duration: f64,
    pub off: Metrics,
    pub on: Metrics,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Trends {
    /// Bare dissipation strictly decreases along the sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dissipation_off_decreasing: Option<bool>,
    /// Bare fidelity deficit strictly decreases along the sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_deficit_off_decreasing: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_omega_drift_on: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_dissipation_on: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_fidelity_on: Option<f64>,
}

impl Trends {
    pub const NAMES: &'static [&'static str] = &[
        "dissipation_off_decreasing",
        "fidelity_deficit_off_decreasing",
        "max_omega_drift_on",
        "max_abs_dissipation_on",
        "min_fidelity_on",
    ];

    pub fn of(rows: &[SweepRow]) -> Self {
        let decreasing = |f: &dyn Fn(&Metrics) -> Option<f64>| -> Option<bool> {
            let v: Option<Vec<f64>> = rows.iter().map(|r| f(&r.off)).collect();
            v.map(|v| v.windows(2).all(|w| w[1] < w[0]))
        };
        let fold = |f: &dyn Fn(&Metrics) -> Option<f64>, pick: fn(f64, f64) -> f64| {
            rows.iter().filter_map(|r| f(&r.on)).reduce(pick)
        };
        Trends {
            dissipation_off_decreasing: decreasing(&|m| m.dissipation),
            fidelity_deficit_off_decreasing: decreasing(&|m| m.fidelity_deficit),
            max_omega_drift_on: fold(&|m| m.omega_drift, f64::max),
            max_abs_dissipation_on: fold(&|m| m.dissipation.map(f64::abs), f64::max),
            min_fidelity_on: fold(&|m| m.min_fidelity, f64::min),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub experiment: String,
    pub axis: &'static str,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub trends: Trends,
    pub assertions: Vec<AssertionOutcome>,
    pub status: Status,
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}
