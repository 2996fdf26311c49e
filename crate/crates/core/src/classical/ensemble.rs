//! Independent-particle ensembles.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{propagate, Flow, IntegratorConfig};
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::model::{PhasePoint, Schedule, SystemModel};
use crate::scalar::Real;

/// Symmetric momentum law for [`Sampler::UniformGas`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentumLaw<T> {
    /// `±p̄` with equal probability.
    TwoPoint { p_bar: T },
    Gaussian { sigma: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler<T> {
    /// Uniform in orbit time on the shell `H₀ = E` at `λ(0)`.
    Shell { energy: T },
    /// Shell sampling with particle `i` confined to orbit-time fraction
    /// `[i/n, (i+1)/n)`; each particle is still uniform on its stratum.
    StratifiedShell { energy: T },
    /// Box only: `q` uniform on `[0, L(0)]`.
    UniformGas { momentum: MomentumLaw<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig<T> {
    pub n_particles: usize,
    pub seed: u64,
    pub snapshot_times: Vec<T>,
    pub integrator: IntegratorConfig<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRecord<T> {
    pub times: Vec<T>,
    /// `snapshots[k][i]` is particle `i` at `times[k]`.
    pub snapshots: Vec<Vec<PhasePoint<T>>>,
    pub seed: u64,
    /// Kolmogorov–Smirnov distance of `q/L(t)` from the uniform law (box only).
    pub ks: Option<Vec<T>>,
    pub initial_omega: Vec<T>,
    pub final_omega: Vec<T>,
    pub initial_energy: Vec<T>,
    pub collisions: usize,
    pub flow: Flow,
}

impl<T: Real> EnsembleRecord<T> {
    pub fn n_particles(&self) -> usize {
        self.initial_omega.len()
    }

    /// Largest per-particle `|ω(T) − ω(0)| / ω(0)`.
    pub fn max_drift(&self) -> T {
        self.initial_omega
            .iter()
            .zip(&self.final_omega)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((b - a).abs() / a))
    }

    pub fn max_ks(&self) -> Option<T> {
        self.ks
            .as_ref()
            .map(|v| v.iter().fold(T::zero(), |acc, &x| acc.max(x)))
    }

    pub fn mean_initial_energy(&self) -> T {
        self.initial_energy.iter().fold(T::zero(), |a, &b| a + b) / T::count(self.initial_energy.len())
    }

    /// Columns `particle,q,p` for snapshot `k`.
    pub fn write_snapshot_csv<W: Write>(&self, k: usize, mut w: W) -> std::io::Result<()> {
        writeln!(w, "particle,q,p")?;
        for (i, z) in self.snapshots[k].iter().enumerate() {
            writeln!(w, "{i},{},{}", z.q, z.p)?;
        }
        Ok(())
    }
}

/// `sup |F_n(x) − x|` for samples on `[0, 1]`.
pub fn ks_uniform<T: Real>(samples: &[T]) -> T {
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = T::count(x.len());
    x.iter().enumerate().fold(T::zero(), |d, (i, &xi)| {
        let above = T::count(i + 1) / n - xi;
        let below = xi - T::count(i) / n;
        d.max(above).max(below)
    })
}

fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn initial_conditions<T: Real>(
    system: &SystemModel<T>,
    schedule: &Schedule<T>,
    sampler: &Sampler<T>,
    n: usize,
    seed: u64,
) -> Result<Vec<PhasePoint<T>>> {
    let lam = schedule.initial();
    match *sampler {
        Sampler::Shell { energy } => {
            let fractions: Vec<T> = (0..n).map(|i| T::lit(particle_rng(seed, i).random::<f64>())).collect();
            system.shell_points(energy, &lam, &fractions)
        }
        Sampler::StratifiedShell { energy } => {
            let fractions: Vec<T> = (0..n)
                .map(|i| (T::count(i) + T::lit(particle_rng(seed, i).random::<f64>())) / T::count(n))
                .collect();
            system.shell_points(energy, &lam, &fractions)
        }
        Sampler::UniformGas { momentum } => {
            if !system.is_box() {
                return Err(Error::Precondition("the uniform gas sampler needs a box".into()));
            }
            let normal = match momentum {
                MomentumLaw::TwoPoint { p_bar } if p_bar > T::zero() => None,
                MomentumLaw::Gaussian { sigma } if sigma > T::zero() => {
                    Some(Normal::new(0.0, sigma.as_f64()).map_err(|e| Error::Precondition(e.to_string()))?)
                }
                _ => return Err(Error::Precondition("momentum scale must be positive".into())),
            };
            Ok((0..n)
                .map(|i| {
                    let mut rng = particle_rng(seed, i);
                    let q = lam.length * T::lit(rng.random::<f64>());
                    let p = match (momentum, &normal) {
                        (MomentumLaw::TwoPoint { p_bar }, _) => {
                            if rng.random::<bool>() {
                                p_bar
                            } else {
                                -p_bar
                            }
                        }
                        (_, Some(d)) => T::lit(d.sample(&mut rng)),
                        _ => unreachable!(),
                    };
                    PhasePoint::new(q, p)
                })
                .collect())
        }
    }
}

/// Propagate `n_particles` independent particles and record snapshots.
/// Particle `i` draws from stream `i` of a ChaCha8 generator seeded with
/// `seed`, so the result does not depend on the worker count.
pub fn evolve_ensemble<T: Real>(
    system: &SystemModel<T>,
    generator: Option<&dyn Generator<T>>,
    schedule: &Schedule<T>,
    sampler: &Sampler<T>,
    config: &EnsembleConfig<T>,
) -> Result<EnsembleRecord<T>> {
    if config.n_particles == 0 {
        return Err(Error::Precondition("ensemble needs at least one particle".into()));
    }
    if config.snapshot_times.is_empty() {
        return Err(Error::Precondition("ensemble needs at least one snapshot time".into()));
    }
    let z0 = initial_conditions(system, schedule, sampler, config.n_particles, config.seed)?;
    let lam0 = schedule.initial();
    // Starting at t = 0 makes ω(0) part of every trajectory record.
    let mut times = config.snapshot_times.clone();
    let prepend = times[0] > T::zero();
    if prepend {
        times.insert(0, T::zero());
    }
    let records = z0
        .par_iter()
        .map(|z| propagate(system, generator, schedule, *z, &times, &config.integrator))
        .collect::<Result<Vec<_>>>()?;
    let skip = usize::from(prepend);
    let n_snap = config.snapshot_times.len();
    let snapshots: Vec<Vec<PhasePoint<T>>> = (0..n_snap)
        .map(|k| records.iter().map(|r| r.points[k + skip]).collect())
        .collect();
    let ks = system.is_box().then(|| {
        config
            .snapshot_times
            .iter()
            .zip(&snapshots)
            .map(|(&t, snap)| {
                let l = schedule.value(t).length;
                let x: Vec<T> = snap.iter().map(|z| z.q / l).collect();
                ks_uniform(&x)
            })
            .collect()
    });
    Ok(EnsembleRecord {
        times: config.snapshot_times.clone(),
        snapshots,
        seed: config.seed,
        ks,
        initial_omega: records.iter().map(|r| r.omega[0]).collect(),
        final_omega: records.iter().map(|r| r.omega[r.omega.len() - 1]).collect(),
        initial_energy: z0.iter().map(|z| system.energy(z, &lam0)).collect(),
        collisions: records.iter().map(|r| r.collisions.len()).sum(),
        flow: if generator.is_some() { super::Flow::CounterDiabatic } else { super::Flow::Bare },
    })
}

/// Mean excess of `H₀` at the final snapshot over the adiabatic shell energy
/// `E(ω₀, λ(T))` of each particle.
pub fn dissipation<T: Real>(record: &EnsembleRecord<T>, system: &SystemModel<T>, schedule: &Schedule<T>) -> Result<T> {
    let k = record.times.len() - 1;
    let lam = schedule.value(record.times[k]);
    let mut sum = T::zero();
    for (z, &w0) in record.snapshots[k].iter().zip(&record.initial_omega) {
        sum += system.energy(z, &lam) - system.shell_energy_from_volume(w0, &lam)?;
    }
    Ok(sum / T::count(record.n_particles()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Dilation;

    fn gas_config(n: usize, t_end: f64) -> EnsembleConfig<f64> {
        EnsembleConfig {
            n_particles: n,
            seed: 42,
            snapshot_times: (0..=5).map(|k| t_end * k as f64 / 5.0).collect(),
            integrator: IntegratorConfig::default(),
        }
    }

    #[test]
    fn ks_of_grid_is_half_spacing() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&x) - 0.005).abs() < 1e-12);
        assert!((ks_uniform(&[0.0_f64; 10]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cd_gas_stays_uniform_and_bare_gas_does_not() {
        let sys = SystemModel::hard_box(1.0).unwrap();
        let sched = Schedule::linear(1.0, 2.0, 0.05).unwrap();
        let sampler = Sampler::UniformGas { momentum: MomentumLaw::TwoPoint { p_bar: 2.0 } };
        let cfg = gas_config(2000, 0.05);
        let g = Dilation::for_box();
        let on = evolve_ensemble(&sys, Some(&g as &dyn Generator<f64>), &sched, &sampler, &cfg).unwrap();
        let off = evolve_ensemble(&sys, None, &sched, &sampler, &cfg).unwrap();
        assert!(on.max_ks().unwrap() < 0.05);
        assert!(off.max_ks().unwrap() > 0.2);
        assert!(on.max_drift() < 1e-8);
        assert_eq!(on.snapshots.len(), 6);
        assert!(on.snapshots.iter().all(|s| s.len() == 2000));
    }

    #[test]
    fn stratified_shell_tracks_mean_dissipation() {
        // Fast box expansion with |p| = 50 and wall speed 20: every right
        // mover hits the wall once and leaves with |p| = 10; left movers with
        // q > 1/2 never reach it. Mean final energy 0.75·50 + 0.25·1250.
        let sys = SystemModel::hard_box(1.0).unwrap();
        let sched = Schedule::linear(1.0, 2.0, 0.05).unwrap();
        let mut cfg = gas_config(2000, 0.05);
        cfg.snapshot_times = vec![0.0, 0.05];
        let rec = evolve_ensemble(&sys, None, &sched, &Sampler::StratifiedShell { energy: 1250.0 }, &cfg).unwrap();
        let d = dissipation(&rec, &sys, &sched).unwrap();
        assert!((d - 37.5).abs() < 3.0, "{d}");
        let q: Vec<f64> = rec.snapshots[0].iter().map(|z| z.q).collect();
        assert!(ks_uniform(&q) < 2.0 / 2000.0);
    }

    #[test]
    fn shell_ensemble_lands_on_one_shell() {
        let sys = SystemModel::power_law(2, 1.0, 1.0).unwrap();
        let sched = Schedule::cosine(1.0, 1.5, 0.7).unwrap();
        let g = Dilation::for_power_law(2);
        let cfg = EnsembleConfig {
            n_particles: 40,
            seed: 3,
            snapshot_times: vec![0.35, 0.7],
            integrator: IntegratorConfig::default(),
        };
        let rec = evolve_ensemble(&sys, Some(&g as &dyn Generator<f64>), &sched, &Sampler::Shell { energy: 1.0 }, &cfg).unwrap();
        let w0 = rec.initial_omega[0];
        assert!(rec.initial_omega.iter().all(|w| ((w - w0) / w0).abs() < 1e-10));
        assert!(rec.final_omega.iter().all(|w| ((w - w0) / w0).abs() < 1e-7));
        assert!(rec.ks.is_none());
        let d = dissipation(&rec, &sys, &sched).unwrap();
        assert!(d.abs() < 1e-6, "dissipation {d}");
        let bare = evolve_ensemble(&sys, None, &sched, &Sampler::Shell { energy: 1.0 }, &cfg).unwrap();
        assert!(dissipation(&bare, &sys, &sched).unwrap() > 1e-3);
    }

    #[test]
    fn static_schedule_has_no_dissipation() {
        let sys = SystemModel::hard_box(1.0).unwrap();
        let sched = Schedule::constant(1.0, 3.0).unwrap();
        let cfg = gas_config(50, 3.0);
        let rec = evolve_ensemble(&sys, None, &sched, &Sampler::Shell { energy: 2.0 }, &cfg).unwrap();
        assert!(dissipation(&rec, &sys, &sched).unwrap().abs() < 1e-10);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let sys = SystemModel::hard_box(1.0).unwrap();
        let sched = Schedule::smoothstep(1.0, 0.6, 0.2).unwrap();
        let sampler = Sampler::UniformGas { momentum: MomentumLaw::Gaussian { sigma: 3.0 } };
        let cfg = gas_config(300, 0.2);
        let a = evolve_ensemble(&sys, None, &sched, &sampler, &cfg).unwrap();
        let b = evolve_ensemble(&sys, None, &sched, &sampler, &cfg).unwrap();
        assert_eq!(a, b);
        let c = evolve_ensemble(&sys, None, &sched, &sampler, &EnsembleConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.snapshots, c.snapshots);
    }

    #[test]
    fn uniform_gas_needs_a_box() {
        let sys = SystemModel::power_law(2, 1.0, 1.0).unwrap();
        let sched = Schedule::constant(1.0, 1.0).unwrap();
        let sampler = Sampler::UniformGas { momentum: MomentumLaw::TwoPoint { p_bar: 1.0 } };
        assert!(evolve_ensemble(&sys, None, &sched, &sampler, &gas_config(10, 1.0)).is_err());
    }
}
