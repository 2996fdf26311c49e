//! Execute one prepared experiment with the counter-diabatic term on or off.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use cdrive_core::classical::{dissipation, evolve_bare, evolve_cd, evolve_ensemble, EnsembleConfig};
use cdrive_core::generators::{build_xi_numeric, generator_for, verify_generator, Dilation, Generator};
use cdrive_core::model::SystemKind;
use cdrive_core::quantum::{
    box_energy, exact_box_phase, h0_tridiagonal, lowest_levels, natural_period, propagate_basis,
    propagate_power_law, xi_spectral, BasisPropagation, GridPropagation, GridSpec, C,
};
use cdrive_core::{Error, Result};
use serde_json::{json, Value};

use crate::config::{ExperimentKind, Prepared};
use crate::report::{GeneratorResidual, Metrics};

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub metrics: Metrics,
    pub convergence: BTreeMap<String, Value>,
    pub artifacts: Vec<String>,
    /// Duration actually run (differs from the config when rescaled to periods).
    pub duration: f64,
}

struct Sink<'a> {
    dir: Option<&'a Path>,
    written: Vec<String>,
}

impl Sink<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let io = |e: std::io::Error| Error::Numerical { routine: "output", detail: format!("{name}: {e}") };
        let file = File::create(dir.join(name)).map_err(io)?;
        f(BufWriter::new(file)).map_err(io)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Run `p`; artifacts go to `out` when given.
pub fn run(p: &Prepared, out: Option<&Path>, verify: bool) -> Result<Outcome> {
    let mut sink = Sink { dir: out, written: Vec::new() };
    let mut o = Outcome { duration: p.schedule.duration(), ..Outcome::default() };
    match p.config.experiment {
        ExperimentKind::ClassicalTrajectory => trajectory(p, &mut o, &mut sink)?,
        ExperimentKind::ClassicalEnsemble => ensemble(p, &mut o, &mut sink)?,
        ExperimentKind::QuantumGrid => quantum_grid(p, &mut o, &mut sink)?,
        ExperimentKind::QuantumBasis => quantum_basis(p, &mut o, &mut sink)?,
        ExperimentKind::GeneratorCheck => generator_suite(p, &mut o.metrics)?,
    }
    if verify {
        if p.config.experiment != ExperimentKind::GeneratorCheck {
            generator_suite(p, &mut o.metrics)?;
        }
        o.metrics.commutator_residual = commutator(p)?;
    }
    o.artifacts = sink.written;
    Ok(o)
}

fn classical_convergence(p: &Prepared, o: &mut Outcome) {
    let num = &p.config.numerics;
    match num.dt {
        Some(dt) => o.convergence.insert("stepping".into(), json!({"fixed_rk4": {"dt": dt}})),
        None => o.convergence.insert("stepping".into(), json!({"adaptive_rk4": {"tol": num.tol}})),
    };
    o.convergence.insert("samples".into(), json!(num.samples));
}

fn trajectory(p: &Prepared, o: &mut Outcome, sink: &mut Sink) -> Result<()> {
    let cfg = p.integrator();
    let z0 = p.initial_point();
    let rec = if p.config.cd_enabled {
        let g = generator_for(&p.system)?;
        evolve_cd(&p.system, g.as_ref(), &p.schedule, z0, &cfg)?
    } else {
        evolve_bare(&p.system, &p.schedule, z0, &cfg)?
    };
    let adiabatic = p.system.shell_energy_from_volume(rec.omega[0], &p.schedule.fin())?;
    let m = &mut o.metrics;
    m.omega_drift = Some(rec.max_drift());
    m.final_omega_drift = Some(rec.final_drift());
    m.dissipation = Some(rec.energy[rec.energy.len() - 1] - adiabatic);
    m.initial_energy = Some(rec.energy[0]);
    m.collisions = Some(rec.collisions.len());
    classical_convergence(p, o);
    sink.write("trajectory.csv", |w| rec.write_csv(w))
}

fn ensemble(p: &Prepared, o: &mut Outcome, sink: &mut Sink) -> Result<()> {
    let num = &p.config.numerics;
    let t = p.schedule.duration();
    let cfg = EnsembleConfig {
        n_particles: num.n_particles,
        seed: num.seed,
        snapshot_times: (0..=num.snapshots).map(|k| t * k as f64 / num.snapshots as f64).collect(),
        integrator: p.integrator(),
    };
    let g = generator_for(&p.system)?;
    let gen = p.config.cd_enabled.then_some(g.as_ref());
    let rec = evolve_ensemble(&p.system, gen, &p.schedule, &p.sampler(), &cfg)?;
    let m = &mut o.metrics;
    m.omega_drift = Some(rec.max_drift());
    m.final_omega_drift = Some(rec.max_drift());
    m.dissipation = Some(dissipation(&rec, &p.system, &p.schedule)?);
    m.initial_energy = Some(rec.mean_initial_energy());
    m.collisions = Some(rec.collisions);
    m.max_ks = rec.max_ks();
    m.ks_series = rec.ks.clone();
    classical_convergence(p, o);
    o.convergence.insert("n_particles".into(), json!(num.n_particles));
    for k in 0..rec.times.len() {
        sink.write(&format!("ensemble_{k}.csv"), |w| rec.write_snapshot_csv(k, w))?;
    }
    Ok(())
}

fn quantum_grid(p: &Prepared, o: &mut Outcome, sink: &mut Sink) -> Result<()> {
    let num = &p.config.numerics;
    let grid = p.grid.expect("validated grid");
    let hbar = num.hbar;
    let lam0 = p.lambda0();
    let schedule = match num.periods {
        Some(k) => p.schedule.with_duration(k * natural_period(&p.system, &lam0, &grid, hbar)?)?,
        None => p.schedule.clone(),
    };
    let t = schedule.duration();
    let dt = num.dt.unwrap_or(t / num.steps as f64);
    let n_levels = num.n_levels.max(num.level + 1).min(grid.n_points / 2);
    let initial = lowest_levels(&h0_tridiagonal(&p.system, &lam0, &grid, hbar)?, n_levels, Some(lam0))?;
    let psi0 = initial.grid_state(num.level, &grid);
    let steps = (t / dt).ceil() as usize;
    let cfg = GridPropagation {
        level: num.level,
        record_every: (steps / num.samples).max(1),
        hbar,
        ..GridPropagation::new(dt)
    };
    let traj = propagate_power_law(&p.system, &schedule, &grid, &psi0, &cfg, p.config.cd_enabled)?;
    let m = &mut o.metrics;
    m.min_fidelity = Some(traj.min_fidelity());
    m.final_fidelity = Some(traj.final_fidelity());
    m.fidelity_deficit = Some(1.0 - traj.final_fidelity());
    m.max_norm_error = Some(traj.max_norm_error);
    o.duration = t;
    o.convergence.insert("dt".into(), json!(dt));
    o.convergence.insert("steps".into(), json!(traj.steps));
    o.convergence.insert("grid".into(), json!({"q_min": grid.q_min, "q_max": grid.q_max, "n_points": grid.n_points}));
    sink.write("trajectory.csv", |w| traj.write_csv(w))?;
    let fin = lowest_levels(&h0_tridiagonal(&p.system, &schedule.fin(), &grid, hbar)?, n_levels, None)?;
    sink.write("spectrum.csv", |mut w| {
        use std::io::Write;
        writeln!(w, "n,E_initial,E_final")?;
        for (k, (a, b)) in initial.energies.iter().zip(&fin.energies).enumerate() {
            writeln!(w, "{k},{a},{b}")?;
        }
        Ok(())
    })
}

fn quantum_basis(p: &Prepared, o: &mut Outcome, sink: &mut Sink) -> Result<()> {
    let num = &p.config.numerics;
    let (n, level, hbar, mass) = (num.n_levels, num.level, num.hbar, p.system.mass());
    let mut c0: Vec<C<f64>> = vec![C::new(0.0, 0.0); n];
    c0[level] = C::new(1.0, 0.0);
    let cfg = BasisPropagation { tol: num.tol, samples: num.samples, hbar, ..BasisPropagation::new(n, p.config.cd_enabled) };
    let traj = propagate_basis(&p.system, &p.schedule, &c0, &cfg)?;
    let pops = traj.populations(level);
    let m = &mut o.metrics;
    m.min_fidelity = Some(pops.iter().copied().fold(f64::INFINITY, f64::min));
    m.final_fidelity = Some(pops[pops.len() - 1]);
    m.fidelity_deficit = Some(1.0 - pops[pops.len() - 1]);
    m.max_norm_error = Some((0..traj.times.len()).map(|k| (traj.norm(k) - 1.0).abs()).fold(0.0, f64::max));
    m.population_drift = Some(traj.max_population_drift());
    m.leakage_warning = Some(traj.leakage_warning);
    if p.config.cd_enabled {
        let mut worst: f64 = 0.0;
        for (t, ph) in traj.times.iter().zip(traj.phase(level)) {
            worst = worst.max((ph - exact_box_phase(level + 1, &p.schedule, *t, mass, hbar)?).abs());
        }
        m.phase_error = Some(worst);
    }
    o.convergence.insert("n_levels".into(), json!(n));
    o.convergence.insert("tol".into(), json!(num.tol));
    sink.write("trajectory.csv", |w| traj.write_csv(level, 4, w))?;
    let (l0, l1) = (p.schedule.initial().length, p.schedule.fin().length);
    sink.write("spectrum.csv", |mut w| {
        use std::io::Write;
        writeln!(w, "n,E_initial,E_final")?;
        for k in 0..n {
            writeln!(w, "{k},{},{}", box_energy(k + 1, l0, mass, hbar), box_energy(k + 1, l1, mass, hbar))?;
        }
        Ok(())
    })
}

fn generator_suite(p: &Prepared, m: &mut Metrics) -> Result<()> {
    let num = &p.config.numerics;
    let lam = p.lambda0();
    let energies: Vec<f64> = num.shells.clone();
    let g = generator_for(&p.system)?;
    let report = verify_generator(&p.system, g.as_ref(), &lam, &energies, num.shell_points)?;
    m.generator_residuals = Some(
        report
            .shells
            .iter()
            .map(|s| GeneratorResidual {
                energy: s.energy,
                bracket_residual: s.bracket_residual,
                average_residual: s.average_residual,
                points: s.points,
            })
            .collect(),
    );
    m.max_bracket_residual = Some(report.max_bracket());
    m.max_average_residual = Some(report.max_average());
    if let Some(mu) = p.system.dilation_coefficient() {
        let wrong: &dyn Generator<f64> = &Dilation::new(1.1 * mu);
        m.control_residual = Some(verify_generator(&p.system, wrong, &lam, &energies, num.shell_points)?.max_bracket());
        if !p.system.is_box() {
            let mut worst: f64 = 0.0;
            for &e in &energies {
                let table = build_xi_numeric(&p.system, e, &lam, 512)?;
                for (z, xi) in table.points.iter().zip(&table.xi) {
                    worst = worst.max((xi - mu * z.q * z.p / lam.length).abs());
                }
            }
            m.numeric_deviation = Some(worst);
        }
    }
    Ok(())
}

/// Relative residual of the truncated commutator identity on 10 levels.
fn commutator(p: &Prepared) -> Result<Option<f64>> {
    let lam = p.lambda0();
    let l = lam.length;
    let grid = match p.system.kind() {
        SystemKind::Box => GridSpec::new(0.0, l, 512)?,
        SystemKind::PowerLaw { .. } => match p.grid {
            Some(g) => g,
            None => GridSpec::new(-8.0 * l, 8.0 * l, 512)?,
        },
        SystemKind::Generic(_) => return Ok(None),
    };
    Ok(Some(xi_spectral(&p.system, &lam, &grid, 10, p.config.numerics.hbar)?.commutator_residual()))
}
