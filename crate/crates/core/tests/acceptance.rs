//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cdrive_core::classical::{
    dissipation, evolve_bare, evolve_cd, evolve_ensemble, EnsembleConfig, IntegratorConfig, MomentumLaw, Sampler,
};
use cdrive_core::generators::{build_xi_numeric, verify_generator, Dilation, Generator};
use cdrive_core::model::{ParamValue, PhasePoint, Schedule, SystemModel};
use cdrive_core::quantum::{
    exact_box_state, h0_tridiagonal, lowest_levels, natural_period, propagate_basis,
    propagate_power_law, stretch_cayley, stretch_exp, stretch_first_order, transport_stretch, xi_dilation_tridiagonal,
    xi_spectral, BasisPropagation, GridPropagation, GridSpec, QuantumState, C,
};
use cdrive_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn protocols() -> Vec<Schedule<f64>> {
    vec![
        Schedule::linear(1.0, 2.0, 0.05).unwrap(),
        Schedule::smoothstep(1.0, 2.0, 0.05).unwrap(),
        Schedule::cosine(1.0, 2.0, 0.05).unwrap(),
    ]
}

fn within(start: Instant, budget: Duration) -> (bool, f64) {
    let s = start.elapsed().as_secs_f64();
    (s < budget.as_secs_f64(), s)
}

fn criterion_1() -> Result<Verdict> {
    let start = Instant::now();
    let sys = SystemModel::hard_box(1.0)?;
    let g = Dilation::for_box();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = IntegratorConfig::default();
    let (mut worst_cd, mut least_bare) = (0.0_f64, f64::INFINITY);
    for sched in protocols() {
        for _ in 0..20 {
            let q = rng.random_range(0.01..0.99);
            let p = rng.random_range(1.0..40.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let z0 = PhasePoint::new(q, p);
            worst_cd = worst_cd.max(evolve_cd(&sys, &g, &sched, z0, &cfg)?.max_drift());
            least_bare = least_bare.min(evolve_bare(&sys, &sched, z0, &cfg)?.max_drift());
        }
    }
    let (fast, secs) = within(start, Duration::from_secs(10));
    verdict(
        worst_cd < 1e-7 && least_bare > 1e-2 && fast,
        format!("max CD drift {worst_cd:.2e} (< 1e-7), min bare drift {least_bare:.2e} (> 1e-2), {secs:.2} s (< 10 s)"),
    )
}

fn criterion_2() -> Result<Verdict> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cfg = IntegratorConfig::default();
    let mut worst = 0.0_f64;
    let mut ratios = Vec::new();
    for b in [2u32, 4, 6] {
        let sys = SystemModel::power_law(b, 1.0, 1.0)?;
        let g = Dilation::new(b as f64 / (b as f64 + 2.0));
        let lam = ParamValue::new(1.0);
        for sched in protocols() {
            for _ in 0..20 {
                let e = rng.random_range(0.5..2.0);
                let z0 = sys.shell_points(e, &lam, &[rng.random_range(0.0..1.0)])?[0];
                worst = worst.max(evolve_cd(&sys, &g, &sched, z0, &cfg)?.max_drift());
            }
        }
        let z0 = sys.shell_points(1.0, &lam, &[0.1])?[0];
        let sched = Schedule::smoothstep(1.0, 2.0, 0.05)?;
        let drift = |dt: f64| -> Result<f64> {
            Ok(evolve_cd(&sys, &g, &sched, z0, &IntegratorConfig::fixed(dt).with_samples(10))?.max_drift())
        };
        // T/10 is still pre-asymptotic for b = 4; drifts at T/80 are ~1e-10, far above roundoff.
        ratios.push(drift(0.05 / 40.0)? / drift(0.05 / 80.0)?);
    }
    let order_ok = ratios.iter().all(|r| (12.0..20.0).contains(r));
    let (fast, secs) = within(start, Duration::from_secs(30));
    verdict(
        worst < 1e-7 && order_ok && fast,
        format!("max drift {worst:.2e} (< 1e-7), dt-halving ratios {ratios:.1?} (≈16), {secs:.2} s (< 30 s)"),
    )
}

fn criterion_3() -> Result<Verdict> {
    let start = Instant::now();
    let lam = ParamValue::new(1.0);
    let (mut dev, mut avg) = (0.0_f64, 0.0_f64);
    for b in [2u32, 4] {
        let sys = SystemModel::power_law(b, 1.0, 1.0)?;
        let mu = b as f64 / (b as f64 + 2.0);
        for e in [0.5, 1.0, 2.0] {
            let table = build_xi_numeric(&sys, e, &lam, 512)?;
            for (z, xi) in table.points.iter().zip(&table.xi) {
                dev = dev.max((xi - mu * z.q * z.p).abs());
            }
            avg = avg.max(table.time_average().abs() / table.scale);
            // Independent orbit average of the closed form.
            let closed = sys.microcanonical_average(|z| mu * z.q * z.p, e, &lam)?;
            avg = avg.max(closed.abs() / table.scale);
        }
    }
    let (fast, secs) = within(start, Duration::from_secs(5));
    verdict(
        dev < 1e-6 && avg < 1e-8 && fast,
        format!("max |ξ_num − μqp/L| {dev:.2e} (< 1e-6), ⟨ξ⟩ residual {avg:.2e} (< 1e-8), {secs:.2} s (< 5 s)"),
    )
}

fn criterion_4() -> Result<Verdict> {
    let lam = ParamValue::new(1.0);
    let shells = [0.5, 1.0, 2.0];
    let mut cases: Vec<(SystemModel<f64>, f64)> = vec![(SystemModel::hard_box(1.0)?, 1.0)];
    for b in [2u32, 4, 6] {
        cases.push((SystemModel::power_law(b, 1.0, 1.0)?, b as f64 / (b as f64 + 2.0)));
    }
    let (mut worst, mut control) = (0.0_f64, f64::INFINITY);
    for (sys, mu) in &cases {
        let right: &dyn Generator<f64> = &Dilation::new(*mu);
        let r = verify_generator(sys, right, &lam, &shells, 100)?;
        worst = worst.max(r.max_bracket()).max(r.max_average());
        let wrong: &dyn Generator<f64> = &Dilation::new(1.1 * mu);
        control = control.min(verify_generator(sys, wrong, &lam, &shells, 100)?.max_bracket());
    }
    verdict(
        worst < 1e-8 && control > 1e-2,
        format!("max residual {worst:.2e} (< 1e-8), min corrupted-control residual {control:.2e} (> 1e-2)"),
    )
}

fn criterion_5() -> Result<Verdict> {
    let sys = SystemModel::hard_box(1.0)?;
    let n_levels = 64;
    let (mut phase_err, mut drift) = (0.0_f64, 0.0_f64);
    for sched in [Schedule::constant(1.0, 1.0)?, Schedule::linear(1.0, 2.0, 1.0)?] {
        for level in [0usize, 1] {
            let mut c0 = vec![C::new(0.0, 0.0); n_levels];
            c0[level] = C::new(1.0, 0.0);
            let traj = propagate_basis(&sys, &sched, &c0, &BasisPropagation::new(n_levels, true))?;
            drift = drift.max(traj.max_population_drift());
            let n = (level + 1) as f64;
            for (k, (&t, ph)) in traj.times.iter().zip(traj.phase(level)).enumerate() {
                // ∫ dt/L² for L = 1 + v t is t/(L(0) L(t)).
                let l = sched.value(t).length;
                let oracle = -PI * PI * n * n * t / (2.0 * l);
                phase_err = phase_err.max((ph - oracle).abs());
                phase_err = phase_err.max(state_phase_error(&sched, t, l, &traj.coefficients[k], level)?);
            }
        }
    }
    verdict(
        phase_err < 1e-8 && drift < 1e-12,
        format!("max phase error {phase_err:.2e} (< 1e-8), population drift {drift:.2e} (< 1e-12)"),
    )
}

/// Phase of `⟨ψ_exact|ψ⟩` with `ψ` rebuilt on a grid from eigenbasis coefficients.
fn state_phase_error(sched: &Schedule<f64>, t: f64, l: f64, coeffs: &[C<f64>], level: usize) -> Result<f64> {
    let grid = GridSpec::new(0.0, l, 256)?;
    let QuantumState::Grid { amplitudes: exact, .. } = exact_box_state(level + 1, sched, t, &grid, 1.0, 1.0)? else {
        unreachable!()
    };
    let amp = (2.0 / l).sqrt();
    let mut overlap = C::new(0.0, 0.0);
    for (j, q) in grid.positions().into_iter().enumerate() {
        let psi: C<f64> = coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c * (amp * ((m + 1) as f64 * PI * q / l).sin()))
            .sum();
        overlap += exact[j].conj() * psi;
    }
    Ok(overlap.arg().abs())
}

fn criterion_6() -> Result<Verdict> {
    let start = Instant::now();
    let grid = GridSpec::new(-8.0, 8.0, 512)?;
    let lam = ParamValue::new(1.0);
    let mut parts = Vec::new();
    let mut pass = true;
    for b in [2u32, 4] {
        let sys = SystemModel::power_law(b, 1.0, 1.0)?;
        let period = natural_period(&sys, &lam, &grid, 1.0)?;
        let sched = Schedule::smoothstep(1.0, 2.0, 0.2 * period)?;
        let psi0 = lowest_levels(&h0_tridiagonal(&sys, &lam, &grid, 1.0)?, 1, Some(lam))?.grid_state(0, &grid);
        let run = |steps: usize, cd: bool| -> Result<_> {
            let cfg = GridPropagation { record_every: (steps / 200).max(1), ..GridPropagation::new(sched.duration() / steps as f64) };
            propagate_power_law(&sys, &sched, &grid, &psi0, &cfg, cd)
        };
        // Halve dt until the monitored fidelities settle.
        let mut steps = 250;
        let (mut on, mut off) = (run(steps, true)?, run(steps, false)?);
        loop {
            let (on2, off2) = (run(2 * steps, true)?, run(2 * steps, false)?);
            let change = (on2.min_fidelity() - on.min_fidelity())
                .abs()
                .max((off2.final_fidelity() - off.final_fidelity()).abs());
            steps *= 2;
            (on, off) = (on2, off2);
            if change < 1e-6 || steps >= 16000 {
                break;
            }
        }
        let ok = on.min_fidelity() > 0.999 && off.final_fidelity() < 0.99;
        pass &= ok;
        parts.push(format!(
            "b={b}: min F_on {:.6} (> 0.999), final F_off {:.4} (< 0.99), {steps} steps",
            on.min_fidelity(),
            off.final_fidelity()
        ));
    }
    let (fast, secs) = within(start, Duration::from_secs(120));
    verdict(pass && fast, format!("{}; {secs:.1} s (< 120 s)", parts.join("; ")))
}

fn criterion_7() -> Result<Verdict> {
    let grid = GridSpec::new(-6.0, 6.0, 512)?;
    let f = |q: f64| (-(q * q) / 2.0).exp() * (1.0 + 0.3 * q);
    let sample = |h: &dyn Fn(f64) -> f64| -> Vec<C<f64>> { grid.positions().into_iter().map(|q| C::new(h(q), 0.0)).collect() };
    let target = |s: f64| sample(&move |q| f(q / s) / s.sqrt());
    let err = |a: &[C<f64>], b: &[C<f64>]| a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).norm()));
    let psi = sample(&f);
    let mut worst = 0.0_f64;
    let dl = 1e-3;
    worst = worst.max(err(&stretch_first_order(&grid, 1.0, dl, &psi), &target(1.0 + dl)));
    worst = worst.max(err(&stretch_cayley(&grid, 1.0, 0.01, &psi)?, &target(1.01)));
    for s in [1.05, 1.1, 1.2] {
        worst = worst.max(err(&stretch_exp(&grid, s, &psi)?, &target(s)));
        worst = worst.max(err(&transport_stretch(&grid, 1.0, s, &psi, 40)?, &target(s)));
    }
    verdict(worst < 1e-4, format!("max |Sψ − s^(-1/2)ψ(q/s)| {worst:.2e} (< 1e-4) at n=512, s ≤ 1.2"))
}

fn criterion_8() -> Result<Verdict> {
    let lam = ParamValue::new(1.0);
    let mut residual = 0.0_f64;
    for (sys, grid) in [
        (SystemModel::power_law(2, 1.0, 1.0)?, GridSpec::new(-8.0, 8.0, 512)?),
        (SystemModel::power_law(4, 1.0, 1.0)?, GridSpec::new(-8.0, 8.0, 512)?),
        (SystemModel::hard_box(1.0)?, GridSpec::new(0.0, 1.0, 512)?),
    ] {
        residual = residual.max(xi_spectral(&sys, &lam, &grid, 10, 1.0)?.commutator_residual());
    }
    let sys = SystemModel::power_law(2, 1.0, 1.0)?;
    let grid = GridSpec::new(-6.0, 6.0, 1024)?;
    let sx = xi_spectral(&sys, &lam, &grid, 10, 1.0)?;
    let dil = sx.project(&xi_dilation_tridiagonal(1.0, 0.5, &grid, 1.0));
    let scale = sx.operator.max_norm();
    let mut dev = 0.0_f64;
    for m in 0..10 {
        for n in 0..10 {
            dev = dev.max((dil[(m, n)] - sx.operator.matrix()[(m, n)]).norm() / scale);
        }
    }
    verdict(
        residual < 1e-8 && dev < 1e-3,
        format!("commutator residual {residual:.2e} (< 1e-8), spectral vs dilation 10×10 {dev:.2e} (< 1e-3)"),
    )
}

fn box_ensemble(sched: &Schedule<f64>, sampler: Sampler<f64>, n: usize, snapshots: usize, seed: u64, cd: bool) -> Result<cdrive_core::classical::EnsembleRecord<f64>> {
    let sys = SystemModel::hard_box(1.0)?;
    let t = sched.duration();
    let cfg = EnsembleConfig {
        n_particles: n,
        seed,
        snapshot_times: (0..=snapshots).map(|k| t * k as f64 / snapshots as f64).collect(),
        integrator: IntegratorConfig::default(),
    };
    let g = Dilation::for_box();
    let gen: Option<&dyn Generator<f64>> = if cd { Some(&g) } else { None };
    evolve_ensemble(&sys, gen, sched, &sampler, &cfg)
}

fn criterion_9() -> Result<Verdict> {
    let start = Instant::now();
    let sched = Schedule::linear(1.0, 2.0, 0.05)?;
    let sampler = Sampler::UniformGas { momentum: MomentumLaw::TwoPoint { p_bar: 1.0 } };
    let on = box_ensemble(&sched, sampler, 10_000, 5, 909, true)?;
    let off = box_ensemble(&sched, sampler, 10_000, 5, 909, false)?;
    let ks_on = on.max_ks().unwrap_or(f64::NAN);
    let ks_off = *off.ks.as_ref().and_then(|k| k.last()).unwrap_or(&f64::NAN);
    let (fast, secs) = within(start, Duration::from_secs(60));
    verdict(
        ks_on < 0.02 && ks_off > 0.1 && fast,
        format!("max KS with CD {ks_on:.4} (< 0.02), final KS bare {ks_off:.4} (> 0.1), {secs:.1} s (< 60 s)"),
    )
}

fn criterion_10() -> Result<Verdict> {
    let sys = SystemModel::hard_box(1.0)?;
    let sampler = Sampler::StratifiedShell { energy: 312.5 };
    let mut bare = Vec::new();
    let mut worst_cd = 0.0_f64;
    for t in [0.05, 0.5, 5.0, 50.0] {
        let sched = Schedule::linear(1.0, 2.0, t)?;
        let off = box_ensemble(&sched, sampler, 400, 1, 3, false)?;
        let on = box_ensemble(&sched, sampler, 400, 1, 3, true)?;
        bare.push(dissipation(&off, &sys, &sched)?);
        worst_cd = worst_cd.max(dissipation(&on, &sys, &sched)?.abs() / on.mean_initial_energy());
    }
    let decreasing = bare.windows(2).all(|w| w[1] < w[0]);
    verdict(
        decreasing && worst_cd < 1e-6,
        format!("bare dissipation over T = 0.05..50: {bare:.4?} (strictly decreasing), max |CD|/E₀ {worst_cd:.2e} (< 1e-6)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Verdict>); 10] = [
        ("exact classical conservation (box)", criterion_1),
        ("power-law conservation and integrator order", criterion_2),
        ("numeric generator oracle", criterion_3),
        ("generator conditions", criterion_4),
        ("quantum box exact oracle", criterion_5),
        ("transitionless grid driving", criterion_6),
        ("dilation identity", criterion_7),
        ("commutator condition", criterion_8),
        ("shock suppression", criterion_9),
        ("adiabatic limit trend", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = match check() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} criterion {:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
