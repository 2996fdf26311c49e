//! Experiment configuration read from JSON.
//!
//! Every field except `experiment`, `system` and `schedule` has a default;
//! the same defaults are recorded in `schema/config.schema.json`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cdrive_core::classical::{IntegratorConfig, MomentumLaw, Sampler};
use cdrive_core::model::{ParamValue, PhasePoint, Schedule, ScaledPolynomial, SystemModel};
use cdrive_core::quantum::GridSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ClassicalTrajectory,
    ClassicalEnsemble,
    QuantumGrid,
    QuantumBasis,
    GeneratorCheck,
}

impl ExperimentKind {
    /// Metric names an experiment of this kind reports.
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::ClassicalTrajectory => &["omega_drift", "final_omega_drift", "dissipation", "collisions"],
            ExperimentKind::ClassicalEnsemble => &["omega_drift", "final_omega_drift", "dissipation", "max_ks", "collisions"],
            ExperimentKind::QuantumGrid => &["min_fidelity", "final_fidelity", "fidelity_deficit", "max_norm_error"],
            ExperimentKind::QuantumBasis => &[
                "min_fidelity",
                "final_fidelity",
                "fidelity_deficit",
                "max_norm_error",
                "population_drift",
                "phase_error",
            ],
            ExperimentKind::GeneratorCheck => {
                &["max_bracket_residual", "max_average_residual", "control_residual", "numeric_deviation"]
            }
        }
    }
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Box {
        #[serde(default = "one")]
        mass: f64,
    },
    PowerLaw {
        exponent: u32,
        #[serde(default = "one")]
        epsilon: f64,
        #[serde(default = "one")]
        mass: f64,
    },
    /// `V = Σ c_k (q/L)^k`, given as `[[c_k, k], …]`.
    Polynomial {
        terms: Vec<(f64, u32)>,
        #[serde(default = "one")]
        mass: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { length: f64, duration: f64 },
    Linear { from: f64, to: f64, duration: f64 },
    Smoothstep { from: f64, to: f64, duration: f64 },
    Cosine { from: f64, to: f64, duration: f64 },
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        rates: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Single phase point for `classical_trajectory`.
    Point { q: f64, p: f64 },
    /// Microcanonical ensemble on the shell of this energy; `stratified`
    /// spreads the particles evenly in orbit time.
    Shell {
        energy: f64,
        #[serde(default)]
        stratified: bool,
    },
    /// Box gas: uniform positions, momenta from `law`.
    UniformGas { law: MomentumSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentumSpec {
    TwoPoint { p_bar: f64 },
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Local tolerance of the adaptive integrators.
    pub tol: f64,
    /// Fixed time step; classical runs switch to fixed-step RK4 when set.
    pub dt: Option<f64>,
    /// Quantum grid steps per run when `dt` is absent.
    pub steps: usize,
    /// Recorded samples per trajectory.
    pub samples: usize,
    pub grid: Option<GridConfig>,
    pub n_levels: usize,
    pub n_particles: usize,
    pub seed: u64,
    /// Ensemble snapshots after `t = 0`.
    pub snapshots: usize,
    /// Tracked quantum level, 0-based.
    pub level: usize,
    pub hbar: f64,
    /// Rescale the quantum grid schedule to this many natural periods of `Ĥ₀(λ(0))`.
    pub periods: Option<f64>,
    /// Shell energies for `generator_check`.
    pub shells: Vec<f64>,
    pub shell_points: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            tol: 1e-10,
            dt: None,
            steps: 1000,
            samples: 200,
            grid: None,
            n_levels: 64,
            n_particles: 2000,
            seed: 0,
            snapshots: 5,
            level: 0,
            hbar: 1.0,
            periods: None,
            shells: vec![0.5, 1.0, 2.0],
            shell_points: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Lt => lhs < rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Gt => lhs > rhs,
            Comparison::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub metric: String,
    pub op: Comparison,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub system: SystemSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default = "yes")]
    pub cd_enabled: bool,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl From<cdrive_core::Error> for ConfigError {
    fn from(e: cdrive_core::Error) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A validated experiment: core objects built, preconditions checked.
#[derive(Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub system: SystemModel<f64>,
    pub schedule: Schedule<f64>,
    pub grid: Option<GridSpec<f64>>,
}

impl std::fmt::Debug for Prepared {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Prepared").field("system", &self.system.tag()).field("schedule", &self.schedule.tag()).finish()
    }
}

pub fn build_system(spec: &SystemSpec) -> Result<SystemModel<f64>, ConfigError> {
    Ok(match spec {
        SystemSpec::Box { mass } => SystemModel::hard_box(*mass)?,
        SystemSpec::PowerLaw { exponent, epsilon, mass } => SystemModel::power_law(*exponent, *epsilon, *mass)?,
        SystemSpec::Polynomial { terms, mass } => {
            SystemModel::generic(Arc::new(ScaledPolynomial::new(terms.clone())?), *mass)?
        }
    })
}

pub fn build_schedule(spec: &ScheduleSpec) -> Result<Schedule<f64>, ConfigError> {
    let s = match spec {
        ScheduleSpec::Constant { length, duration } => Schedule::constant(*length, *duration)?,
        ScheduleSpec::Linear { from, to, duration } => Schedule::linear(*from, *to, *duration)?,
        ScheduleSpec::Smoothstep { from, to, duration } => Schedule::smoothstep(*from, *to, *duration)?,
        ScheduleSpec::Cosine { from, to, duration } => Schedule::cosine(*from, *to, *duration)?,
        ScheduleSpec::Tabulated { times, values, rates } => {
            Schedule::tabulated(times.clone(), values.clone(), rates.clone())?
        }
    };
    s.validate()?;
    Ok(s)
}

fn largest_length(schedule: &Schedule<f64>) -> f64 {
    (0..=64).map(|k| schedule.value(schedule.duration() * k as f64 / 64.0).length).fold(0.0, f64::max)
}

impl Prepared {
    pub fn new(config: ExperimentConfig) -> Result<Self, ConfigError> {
        let system = build_system(&config.system)?;
        let schedule = build_schedule(&config.schedule)?;
        let num = &config.numerics;
        if !(num.tol > 0.0) || num.samples == 0 || !(num.hbar > 0.0) {
            return Err(invalid("numerics: tol and hbar must be positive and samples at least 1"));
        }
        if let Some(dt) = num.dt {
            if !(dt > 0.0 && dt <= schedule.duration()) {
                return Err(invalid(format!("numerics.dt = {dt} must lie in (0, T]")));
            }
        }
        for a in &config.assertions {
            if !config.experiment.metrics().contains(&a.metric.as_str()) {
                return Err(invalid(format!(
                    "assertion on unknown metric '{}' (available: {})",
                    a.metric,
                    config.experiment.metrics().join(", ")
                )));
            }
        }
        let lam0 = schedule.initial();
        let mut grid = None;
        match config.experiment {
            ExperimentKind::ClassicalTrajectory => match config.initial {
                Some(InitialSpec::Point { q, p }) => {
                    if !system.contains(&PhasePoint::new(q, p), &lam0) {
                        return Err(invalid(format!("initial point ({q}, {p}) lies outside the system")));
                    }
                }
                _ => return Err(invalid("classical_trajectory needs an initial point {\"kind\": \"point\", ...}")),
            },
            ExperimentKind::ClassicalEnsemble => {
                if num.n_particles == 0 || num.snapshots == 0 {
                    return Err(invalid("ensemble needs n_particles and snapshots of at least 1"));
                }
                match &config.initial {
                    Some(InitialSpec::Point { .. }) => return Err(invalid("an ensemble cannot start from a point")),
                    Some(InitialSpec::UniformGas { .. }) if !system.is_box() => {
                        return Err(invalid("the uniform gas sampler needs the box"))
                    }
                    Some(InitialSpec::Shell { energy, .. }) => {
                        system.shell(*energy, &lam0)?;
                    }
                    None if !system.is_box() => {
                        return Err(invalid("ensembles in smooth potentials need a shell energy"));
                    }
                    _ => {}
                }
            }
            ExperimentKind::QuantumGrid => {
                if !matches!(config.system, SystemSpec::PowerLaw { .. }) {
                    return Err(invalid("quantum_grid runs power-law systems; use quantum_basis for the box"));
                }
                let g = match num.grid {
                    Some(g) => GridSpec::new(g.q_min, g.q_max, g.n_points)?,
                    None => {
                        let reach = 8.0 * largest_length(&schedule);
                        GridSpec::new(-reach, reach, 512)?
                    }
                };
                if num.steps == 0 {
                    return Err(invalid("numerics.steps must be at least 1"));
                }
                if let Some(p) = num.periods {
                    if !(p > 0.0) {
                        return Err(invalid("numerics.periods must be positive"));
                    }
                }
                if num.level + 1 >= g.n_points {
                    return Err(invalid("tracked level exceeds the grid size"));
                }
                grid = Some(g);
            }
            ExperimentKind::QuantumBasis => {
                if !system.is_box() {
                    return Err(invalid("quantum_basis is implemented for the box"));
                }
                if num.n_levels < 2 || num.level >= num.n_levels {
                    return Err(invalid("quantum_basis needs n_levels ≥ 2 and level < n_levels"));
                }
            }
            ExperimentKind::GeneratorCheck => {
                if num.shells.is_empty() {
                    return Err(invalid("generator_check needs at least one shell energy"));
                }
                for &e in &num.shells {
                    system.shell(e, &lam0)?;
                }
            }
        }
        Ok(Prepared { config, system, schedule, grid })
    }

    pub fn integrator(&self) -> IntegratorConfig<f64> {
        let num = &self.config.numerics;
        match num.dt {
            Some(dt) => IntegratorConfig::fixed(dt),
            None => IntegratorConfig::adaptive(num.tol),
        }
        .with_samples(num.samples)
    }

    pub fn sampler(&self) -> Sampler<f64> {
        match &self.config.initial {
            Some(InitialSpec::Shell { energy, stratified: false }) => Sampler::Shell { energy: *energy },
            Some(InitialSpec::Shell { energy, stratified: true }) => Sampler::StratifiedShell { energy: *energy },
            Some(InitialSpec::UniformGas { law }) => Sampler::UniformGas {
                momentum: match law {
                    MomentumSpec::TwoPoint { p_bar } => MomentumLaw::TwoPoint { p_bar: *p_bar },
                    MomentumSpec::Gaussian { sigma } => MomentumLaw::Gaussian { sigma: *sigma },
                },
            },
            _ => Sampler::UniformGas { momentum: MomentumLaw::TwoPoint { p_bar: 1.0 } },
        }
    }

    pub fn initial_point(&self) -> PhasePoint<f64> {
        match self.config.initial {
            Some(InitialSpec::Point { q, p }) => PhasePoint::new(q, p),
            _ => unreachable!("validated in Prepared::new"),
        }
    }

    pub fn lambda0(&self) -> ParamValue<f64> {
        self.schedule.initial()
    }

    /// Same experiment with the total duration replaced.
    pub fn with_duration(&self, duration: f64) -> Result<Self, ConfigError> {
        let mut p = self.clone();
        p.schedule = self.schedule.with_duration(duration)?;
        p.schedule.validate()?;
        Ok(p)
    }

    pub fn with_cd(&self, enabled: bool) -> Self {
        let mut p = self.clone();
        p.config.cd_enabled = enabled;
        p
    }
}
