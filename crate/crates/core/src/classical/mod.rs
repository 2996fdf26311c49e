//! Trajectories under `H(z, t) = H₀(z; λ(t)) + λ̇ ξ(z; λ(t))`.
//!
//! Smooth systems are integrated with step-doubling RK4. The box uses the same
//! integrator between collisions; wall crossings are located by bisection and
//! resolved with [`collide`].

mod ensemble;

pub use ensemble::{
    dissipation, evolve_ensemble, ks_uniform, EnsembleConfig, EnsembleRecord, MomentumLaw, Sampler,
};

use std::cell::RefCell;
use std::io::Write;

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::model::{PhasePoint, Schedule, SystemModel};
use crate::numerics::ode::{self, Event, StepControl};
use crate::scalar::Real;

/// Which Hamiltonian drives the particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    CounterDiabatic,
    Bare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    /// `q = 0`, at rest.
    Left,
    /// `q = L(t)`, moving with `L̇`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision<T> {
    pub time: T,
    pub wall: Wall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepping<T> {
    /// Local error tolerance and an optional step cap (default: an eighth of
    /// the shorter of the duration and the initial orbital period).
    Adaptive { tol: T, h_max: Option<T> },
    Fixed { dt: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub stepping: Stepping<T>,
    /// Number of equal sampling intervals on `[0, T]`.
    pub samples: usize,
}

impl<T: Real> IntegratorConfig<T> {
    pub fn adaptive(tol: f64) -> Self {
        IntegratorConfig {
            stepping: Stepping::Adaptive { tol: T::tol(tol), h_max: None },
            samples: 200,
        }
    }

    pub fn fixed(dt: T) -> Self {
        IntegratorConfig { stepping: Stepping::Fixed { dt }, samples: 200 }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self::adaptive(1e-10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<T> {
    pub times: Vec<T>,
    pub points: Vec<PhasePoint<T>>,
    pub omega: Vec<T>,
    pub energy: Vec<T>,
    pub collisions: Vec<Collision<T>>,
    pub flow: Flow,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_t |ω(t) − ω(0)| / ω(0)`
    pub fn max_drift(&self) -> T {
        let w0 = self.omega[0];
        self.omega
            .iter()
            .fold(T::zero(), |acc, &w| acc.max((w - w0).abs() / w0))
    }

    /// `|ω(T) − ω(0)| / ω(0)`
    pub fn final_drift(&self) -> T {
        let w0 = self.omega[0];
        (self.omega[self.omega.len() - 1] - w0).abs() / w0
    }

    pub fn last(&self) -> PhasePoint<T> {
        self.points[self.points.len() - 1]
    }

    /// Columns `t,q,p,H0,omega`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,q,p,H0,omega")?;
        for i in 0..self.times.len() {
            let z = self.points[i];
            writeln!(w, "{},{},{},{},{}", self.times[i], z.q, z.p, self.energy[i], self.omega[i])?;
        }
        Ok(())
    }
}

/// Momentum just after a bounce at `wall`.
///
/// Under the counter-diabatic flow the lab velocity at the moving wall is
/// `p/m + L̇`, so the wall-frame reflection is `p → −p` at both walls. Under
/// the bare flow the moving wall gives `p → −p + 2mL̇`.
pub fn collide<T: Real>(p: T, wall: Wall, rate: T, mass: T, flow: Flow) -> Result<T> {
    let wall_speed = match wall {
        Wall::Left => T::zero(),
        Wall::Right => rate,
    };
    let relative = match (flow, wall) {
        (Flow::CounterDiabatic, _) | (Flow::Bare, Wall::Left) => p / mass,
        (Flow::Bare, Wall::Right) => p / mass - wall_speed,
    };
    let incoming = match wall {
        Wall::Left => relative < T::zero(),
        Wall::Right => relative > T::zero(),
    };
    if !incoming {
        return Err(Error::Logic(format!(
            "collision at {wall:?} wall with relative velocity {relative} pointing into the box"
        )));
    }
    Ok(match flow {
        Flow::CounterDiabatic => -p,
        Flow::Bare => -p + T::lit(2.0) * mass * wall_speed,
    })
}

/// Evolve `z0` under `H₀ + λ̇ ξ`, sampling on an even grid of `config.samples` intervals.
pub fn evolve_cd<T: Real>(
    system: &SystemModel<T>,
    generator: &dyn Generator<T>,
    schedule: &Schedule<T>,
    z0: PhasePoint<T>,
    config: &IntegratorConfig<T>,
) -> Result<TrajectoryRecord<T>> {
    let times = sample_times(schedule.duration(), config.samples)?;
    propagate(system, Some(generator), schedule, z0, &times, config)
}

/// Evolve `z0` under `H₀` alone.
pub fn evolve_bare<T: Real>(
    system: &SystemModel<T>,
    schedule: &Schedule<T>,
    z0: PhasePoint<T>,
    config: &IntegratorConfig<T>,
) -> Result<TrajectoryRecord<T>> {
    let times = sample_times(schedule.duration(), config.samples)?;
    propagate(system, None, schedule, z0, &times, config)
}

fn sample_times<T: Real>(duration: T, samples: usize) -> Result<Vec<T>> {
    if samples == 0 {
        return Err(Error::Precondition("at least one sampling interval is required".into()));
    }
    Ok((0..=samples)
        .map(|k| if k == samples { duration } else { duration * T::count(k) / T::count(samples) })
        .collect())
}

/// Step control for a trajectory starting at `z0`.
fn base_control<T: Real>(
    system: &SystemModel<T>,
    schedule: &Schedule<T>,
    z0: &PhasePoint<T>,
    stepping: Stepping<T>,
) -> Result<StepControl<T>> {
    match stepping {
        Stepping::Fixed { dt } => {
            if !(dt > T::zero() && dt.is_finite()) {
                return Err(Error::Precondition(format!("time step must be positive, got {dt}")));
            }
            Ok(StepControl::Fixed { h: dt })
        }
        Stepping::Adaptive { tol, h_max } => {
            if !(tol > T::zero()) {
                return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
            }
            let h_max = match h_max {
                Some(h) => h,
                None => {
                    let lam = schedule.initial();
                    let e0 = system.energy(z0, &lam);
                    let period = if e0 > system.minimum_energy(&lam)? {
                        system.period(e0, &lam)?
                    } else {
                        schedule.duration()
                    };
                    period.min(schedule.duration()) / T::lit(8.0)
                }
            };
            Ok(StepControl::Adaptive { tol, h_max })
        }
    }
}

/// Integrate from `t = 0`, recording at `times` (non-decreasing, within `[0, T]`).
pub(crate) fn propagate<T: Real>(
    system: &SystemModel<T>,
    generator: Option<&dyn Generator<T>>,
    schedule: &Schedule<T>,
    z0: PhasePoint<T>,
    times: &[T],
    config: &IntegratorConfig<T>,
) -> Result<TrajectoryRecord<T>> {
    let big_t = schedule.duration();
    let lam0 = schedule.initial();
    if !system.contains(&z0, &lam0) {
        return Err(Error::Domain(format!(
            "initial point ({}, {}) is outside the accessible region at L = {}",
            z0.q, z0.p, lam0.length
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|&t| t < T::zero() || t > big_t) {
        return Err(Error::Precondition("record times must be strictly increasing within [0, T]".into()));
    }
    let flow = if generator.is_some() { Flow::CounterDiabatic } else { Flow::Bare };
    let ctrl = base_control(system, schedule, &z0, config.stepping)?;
    let mass = system.mass();

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let rhs = |t: T, y: &[T; 3]| -> [T; 3] {
        let lam = schedule.value(t);
        let z = PhasePoint::new(y[0], y[1]);
        let (hq, hp) = system.grad_z(&z, &lam);
        let (mut dq, mut dp) = (hp, -hq);
        if let Some(g) = generator {
            let rate = schedule.rate(t).length;
            if rate != T::zero() {
                match g.grad_z(&z, &lam) {
                    Ok((xq, xp)) => {
                        dq += rate * xp;
                        dp -= rate * xq;
                    }
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                    }
                }
            }
        }
        [dq, dp, T::one()]
    };
    let check = || -> Result<()> {
        match failure.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    };

    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(times.len()),
        points: Vec::with_capacity(times.len()),
        omega: Vec::with_capacity(times.len()),
        energy: Vec::with_capacity(times.len()),
        collisions: Vec::new(),
        flow,
    };
    let push = |rec: &mut TrajectoryRecord<T>, t: T, z: PhasePoint<T>| -> Result<()> {
        if !z.is_finite() {
            return Err(Error::numerical("evolve", format!("non-finite state at t = {t}")));
        }
        let lam = schedule.value(t);
        rec.times.push(t);
        rec.points.push(z);
        rec.energy.push(system.energy(&z, &lam));
        rec.omega.push(system.adiabatic_invariant(&z, &lam)?);
        Ok(())
    };

    let t_tol = T::tol(1e-13) * big_t;
    let mut t = T::zero();
    let mut y = [z0.q, z0.p, T::zero()];
    let mut h = ctrl.initial_step();
    for &target in times {
        while t < target {
            if system.is_box() {
                let lam = schedule.value(t);
                let ctrl_here = wall_capped(ctrl, &rhs, t, &y, lam.length);
                check()?;
                let g = |y: &[T; 3]| {
                    let l = schedule.value(y[2]).length;
                    (-y[0]).max(y[0] - l)
                };
                let ev = ode::integrate_to_crossing(&rhs, t, y, g, 1, target, ctrl_here, t_tol)?;
                check()?;
                match ev {
                    Event::Reached { y: y1, .. } => {
                        y = y1;
                        t = target;
                    }
                    Event::Crossed { t: tc, y: yc } => {
                        let l = schedule.value(tc).length;
                        let rate = schedule.rate(tc).length;
                        let wall = if yc[0] >= l * T::lit(0.5) { Wall::Right } else { Wall::Left };
                        let q_wall = match wall {
                            Wall::Left => T::zero(),
                            Wall::Right => l,
                        };
                        if (yc[0] - q_wall).abs() > T::tol(1e-8) * l {
                            return Err(Error::numerical(
                                "wall event",
                                format!("crossing at t = {tc} left q = {} at distance {} from the wall", yc[0], (yc[0] - q_wall).abs()),
                            ));
                        }
                        let p = collide(yc[1], wall, rate, mass, flow)?;
                        rec.collisions.push(Collision { time: tc, wall });
                        y = [q_wall, p, tc];
                        t = tc;
                    }
                }
            } else {
                let (y1, h1) = ode::integrate(&rhs, t, y, target, ctrl, h)?;
                check()?;
                y = y1;
                h = h1;
                t = target;
            }
        }
        push(&mut rec, target, PhasePoint::new(y[0], y[1]))?;
    }
    Ok(rec)
}

/// Cap the step so one step cannot cross more than a quarter of the box.
fn wall_capped<T: Real, F>(ctrl: StepControl<T>, rhs: &F, t: T, y: &[T; 3], length: T) -> StepControl<T>
where
    F: Fn(T, &[T; 3]) -> [T; 3],
{
    let speed = rhs(t, y)[0].abs();
    let cap = if speed > T::zero() { length * T::lit(0.25) / speed } else { T::max_value().unwrap_or(T::one()) };
    match ctrl {
        StepControl::Adaptive { tol, h_max } => StepControl::Adaptive { tol, h_max: h_max.min(cap) },
        StepControl::Fixed { h } => StepControl::Fixed { h: h.min(cap) },
    }
}

/// Determinant of the time-`T` flow map at `z0`, from central differences
/// over four neighbouring trajectories at offsets `±eps` in `q` and `p`.
pub fn flow_map_determinant<T: Real>(
    system: &SystemModel<T>,
    generator: Option<&dyn Generator<T>>,
    schedule: &Schedule<T>,
    z0: PhasePoint<T>,
    eps: T,
    config: &IntegratorConfig<T>,
) -> Result<T> {
    if system.is_box() {
        return Err(Error::Precondition("the flow-map determinant is defined for smooth systems".into()));
    }
    let end = [schedule.duration()];
    let run = |dq: T, dp: T| -> Result<PhasePoint<T>> {
        let z = PhasePoint::new(z0.q + dq, z0.p + dp);
        Ok(propagate(system, generator, schedule, z, &end, config)?.last())
    };
    let (qp, qm) = (run(eps, T::zero())?, run(-eps, T::zero())?);
    let (pp, pm) = (run(T::zero(), eps)?, run(T::zero(), -eps)?);
    let two_eps = T::lit(2.0) * eps;
    let j11 = (qp.q - qm.q) / two_eps;
    let j21 = (qp.p - qm.p) / two_eps;
    let j12 = (pp.q - pm.q) / two_eps;
    let j22 = (pp.p - pm.p) / two_eps;
    Ok(j11 * j22 - j12 * j21)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{Dilation, Generator};
    use crate::model::ParamValue;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> SystemModel<f64> {
        SystemModel::hard_box(1.0).unwrap()
    }

    #[test]
    fn collide_examples() {
        assert_eq!(collide(3.0, Wall::Right, 0.7, 1.0, Flow::CounterDiabatic).unwrap(), -3.0);
        assert_eq!(collide(3.0, Wall::Right, 0.5, 1.0, Flow::Bare).unwrap(), -2.0);
        for flow in [Flow::CounterDiabatic, Flow::Bare] {
            assert_eq!(collide(-3.0, Wall::Left, 0.5, 1.0, flow).unwrap(), 3.0);
        }
    }

    #[test]
    fn collide_rejects_outgoing_particles() {
        assert!(matches!(collide(-1.0, Wall::Right, 0.0, 1.0, Flow::CounterDiabatic), Err(Error::Logic(_))));
        assert!(matches!(collide(1.0, Wall::Left, 0.0, 1.0, Flow::Bare), Err(Error::Logic(_))));
        // Slower than a receding wall.
        assert!(matches!(collide(0.3, Wall::Right, 0.5, 1.0, Flow::Bare), Err(Error::Logic(_))));
    }

    #[test]
    fn cd_bounce_preserves_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let l: f64 = rng.random_range(0.5..3.0);
            let p: f64 = rng.random_range(0.1..20.0);
            let rate: f64 = rng.random_range(-5.0..5.0);
            let p1 = collide(p, Wall::Right, rate, 1.0, Flow::CounterDiabatic).unwrap();
            assert_eq!(2.0 * p1.abs() * l, 2.0 * p.abs() * l);
        }
    }

    #[test]
    fn box_cd_conserves_invariant_linear() {
        let sys = unit_box();
        let sched = Schedule::linear(1.0, 2.0, 1.0).unwrap();
        let rec = evolve_cd(&sys, &Dilation::for_box(), &sched, PhasePoint::new(0.5, 3.0), &IntegratorConfig::default()).unwrap();
        assert!(rec.max_drift() < 1e-8, "drift {}", rec.max_drift());
        assert!(!rec.collisions.is_empty());
        assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
    }

    /// Closed form for `L = L₀ + v t` under the CD flow: `p L` is constant
    /// between bounces, the stretched coordinate `u = q/L` moves with
    /// `du/dt = p(t)/(m L(t)) = c/(m L²)`, so `u(t) = u₀ ± c t/(m L₀ L(t))`
    /// folded into `[0, 1]`.
    fn linear_box_oracle(l0: f64, v: f64, q0: f64, p0: f64, t: f64) -> (f64, f64) {
        let l = l0 + v * t;
        let c = p0 * l0;
        let s = q0 / l0 + c * t / (l0 * l);
        let folded = s.rem_euclid(2.0);
        let (u, sign) = if folded <= 1.0 { (folded, 1.0) } else { (2.0 - folded, -1.0) };
        (u * l, sign * c / l)
    }

    #[test]
    fn box_cd_matches_linear_closed_form() {
        let sys = unit_box();
        for (v, q0, p0) in [(1.0, 0.45, 3.0), (-0.4, 0.2, -5.0), (2.0, 0.9, 1.5)] {
            let sched = Schedule::linear(1.0, 1.0 + v, 1.0).unwrap();
            let rec = evolve_cd(&sys, &Dilation::for_box(), &sched, PhasePoint::new(q0, p0), &IntegratorConfig::default().with_samples(50)).unwrap();
            for (t, z) in rec.times.iter().zip(&rec.points) {
                let (q, p) = linear_box_oracle(1.0, v, q0, p0, *t);
                assert!((z.q - q).abs() < 1e-7 && (z.p - p).abs() < 1e-7, "t={t}: ({}, {}) vs ({q}, {p})", z.q, z.p);
            }
        }
    }

    #[test]
    fn static_box_bounces_evenly() {
        let sys = unit_box();
        let sched = Schedule::constant(1.0, 2.0).unwrap();
        let rec = evolve_bare(&sys, &sched, PhasePoint::new(0.25, 2.0), &IntegratorConfig::default()).unwrap();
        assert!(rec.points.iter().all(|z| (z.p.abs() - 2.0).abs() < 1e-12));
        let t: Vec<f64> = rec.collisions.iter().map(|c| c.time).collect();
        assert_eq!(t.len(), 4);
        for w in t.windows(2) {
            assert!((w[1] - w[0] - 0.5).abs() < 1e-10);
        }
        assert!(rec.max_drift() < 1e-10);
    }

    #[test]
    fn bare_fast_expansion_breaks_invariant() {
        let sys = unit_box();
        let sched = Schedule::linear(1.0, 2.0, 0.05).unwrap();
        // E = 2 ⇒ |p| = 2; starting next to the moving wall guarantees a hit.
        let rec = evolve_bare(&sys, &sched, PhasePoint::new(0.99, 2.0), &IntegratorConfig::default()).unwrap();
        assert!(rec.final_drift() > 0.05, "drift {}", rec.final_drift());
    }

    #[test]
    fn bare_slow_expansion_is_adiabatic() {
        let sys = unit_box();
        // Period 2mL/|p| = 1 at L = 1, p = 2. While the wall moves, ω = 2|p|L
        // has a sawtooth of relative size L̇τ/L between bounces; the smoothstep
        // brings L̇ back to zero, so the end value measures the net change.
        let sched = Schedule::smoothstep(1.0, 2.0, 100.0).unwrap();
        let rec = evolve_bare(&sys, &sched, PhasePoint::new(0.3, 2.0), &IntegratorConfig::default()).unwrap();
        assert!(rec.final_drift() < 1e-3, "drift {}", rec.final_drift());
    }

    #[test]
    fn power_law_cd_conserves_invariant() {
        let sys = SystemModel::power_law(2, 1.0, 1.0).unwrap();
        let lam = ParamValue::new(1.0);
        let period = sys.period(1.0, &lam).unwrap();
        let sched = Schedule::smoothstep(1.0, 2.0, 0.1 * period).unwrap();
        let z0 = sys.shell_points(1.0, &lam, &[0.3]).unwrap()[0];
        let g = Dilation::for_power_law(2);
        let rec = evolve_cd(&sys, &g, &sched, z0, &IntegratorConfig::default()).unwrap();
        assert!(rec.max_drift() < 1e-7, "drift {}", rec.max_drift());
        let bare = evolve_bare(&sys, &sched, z0, &IntegratorConfig::default()).unwrap();
        assert!(bare.final_drift() > 1e-2);
    }

    #[test]
    fn fixed_step_drift_is_fourth_order() {
        let sys = SystemModel::power_law(4, 1.0, 1.0).unwrap();
        let lam = ParamValue::new(1.0);
        let z0 = sys.shell_points(1.0, &lam, &[0.1]).unwrap()[0];
        let sched = Schedule::smoothstep(1.0, 2.0, 1.0).unwrap();
        let g = Dilation::for_power_law(4);
        let drift = |dt: f64| evolve_cd(&sys, &g, &sched, z0, &IntegratorConfig::fixed(dt).with_samples(10)).unwrap().max_drift();
        let (d1, d2) = (drift(0.02), drift(0.01));
        let ratio = d1 / d2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio} ({d1}, {d2})");
    }

    #[test]
    fn static_schedule_conserves_energy() {
        let sys = SystemModel::power_law(2, 1.0, 1.0).unwrap();
        let sched = Schedule::constant(1.3, 5.0).unwrap();
        let rec = evolve_bare(&sys, &sched, PhasePoint::new(0.4, 0.9), &IntegratorConfig::default()).unwrap();
        assert!(rec.max_drift() < 1e-10);
        assert!(rec.collisions.is_empty());
    }

    #[test]
    fn liouville_determinant_is_one() {
        let sys = SystemModel::power_law(4, 1.0, 1.0).unwrap();
        let sched = Schedule::cosine(1.0, 1.5, 2.0).unwrap();
        let g = Dilation::for_power_law(4);
        let cfg = IntegratorConfig::adaptive(1e-12);
        for gen in [Some(&g as &dyn Generator<f64>), None] {
            let det = flow_map_determinant(&sys, gen, &sched, PhasePoint::new(0.3, 0.8), 1e-5, &cfg).unwrap();
            assert!((det - 1.0).abs() < 1e-4, "det {det}");
        }
    }

    #[test]
    fn numeric_generator_drives_generic_potential() {
        use crate::generators::NumericGenerator;
        use crate::model::ScaledPolynomial;
        use std::sync::Arc;
        let pot = ScaledPolynomial::new(vec![(1.0, 4), (0.5, 2), (0.2, 1)]).unwrap();
        let sys = SystemModel::generic(Arc::new(pot), 1.0).unwrap();
        let lam = ParamValue::new(1.0);
        let e0 = 1.0;
        let period = sys.period(e0, &lam).unwrap();
        let sched = Schedule::smoothstep(1.0, 1.4, 0.5 * period).unwrap();
        let z0 = sys.shell_points(e0, &lam, &[0.2]).unwrap()[0];
        let g = NumericGenerator::new(sys.clone()).unwrap();
        let cfg = IntegratorConfig::adaptive(1e-10).with_samples(8);
        let rec = evolve_cd(&sys, &g, &sched, z0, &cfg).unwrap();
        let bare = evolve_bare(&sys, &sched, z0, &cfg).unwrap();
        assert!(rec.max_drift() < 1e-6, "drift {}", rec.max_drift());
        assert!(bare.final_drift() > 100.0 * rec.max_drift());
    }

    #[test]
    fn rejects_points_outside_box() {
        let sched = Schedule::constant(1.0, 1.0).unwrap();
        let err = evolve_bare(&unit_box(), &sched, PhasePoint::new(1.5, 1.0), &IntegratorConfig::default());
        assert!(matches!(err, Err(Error::Domain(_))));
        let err = evolve_bare(&unit_box(), &sched, PhasePoint::new(0.5, 1.0), &IntegratorConfig::fixed(0.0));
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn csv_has_expected_columns() {
        let sched = Schedule::constant(1.0, 1.0).unwrap();
        let rec = evolve_bare(&unit_box(), &sched, PhasePoint::new(0.5, 1.0), &IntegratorConfig::default().with_samples(4)).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,q,p,H0,omega\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
