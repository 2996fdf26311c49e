//! Energy-shell geometry: enclosed volume `Ω(E, L)`, its inverse, periods and
//! microcanonical averages.
//!
//! Closed forms are used for the box and for power laws; generic potentials go
//! through adaptive quadrature in the variable `θ` with
//! `q = q₋ + (q₊ − q₋) sin²θ`, which removes the square-root behaviour at the
//! turning points.

use super::{ParamValue, PhasePoint, SystemKind, SystemModel};
use crate::error::{Error, Result};
use crate::numerics::ode::{self, StepControl};
use crate::numerics::quadrature::{self, QuadOptions};
use crate::numerics::roots::expand_and_solve;
use crate::scalar::Real;

/// Relative accuracy requested from shell quadratures.
const SHELL_QUAD_TOL: f64 = 1e-13;
/// Local tolerance for orbit integration.
const ORBIT_TOL: f64 = 1e-12;

/// The level set `H₀ = E` at fixed `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyShell<T> {
    pub energy: T,
    pub param: ParamValue<T>,
    pub volume: T,
    /// `(q₋, q₊)`; the walls `(0, L)` for the box.
    pub turning_points: (T, T),
}

/// Time average of an observable over one orbit, together with the period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitAverage<T> {
    pub period: T,
    pub mean: T,
}

/// Stepping parameters for one shell.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OrbitSetup<T> {
    pub q_minus: T,
    pub q_plus: T,
    /// Rough period estimate used to scale steps and search windows.
    pub time_scale: T,
    pub ctrl: StepControl<T>,
    pub t_tol: T,
}

/// `c = √(8πm) ε^{-1/b} Γ(1 + 1/b) / Γ(3/2 + 1/b)`
fn power_law_constant<T: Real>(exponent: u32, epsilon: T, mass: T) -> T {
    let inv_b = 1.0 / exponent as f64;
    let ratio = libm::tgamma(1.0 + inv_b) / libm::tgamma(1.5 + inv_b);
    (T::lit(8.0) * T::pi() * mass).sqrt() * epsilon.powf(-T::lit(inv_b)) * T::lit(ratio)
}

/// Five-point Gauss–Legendre rule for `∫_a^{a+len} f`.
fn gauss5<T: Real, F: Fn(T) -> T>(f: F, a: T, len: T) -> T {
    const NODES: [f64; 3] = [0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
    const WEIGHTS: [f64; 3] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];
    let half = len * T::lit(0.5);
    let mid = a + half;
    let mut acc = T::lit(WEIGHTS[0]) * f(mid);
    for k in 1..3 {
        let x = half * T::lit(NODES[k]);
        acc += T::lit(WEIGHTS[k]) * (f(mid - x) + f(mid + x));
    }
    acc * half
}

impl<T: Real> SystemModel<T> {
    /// `E − V(q)` at distance `dist` inside the turning point `turn` (the right
    /// one when `right` is set). Close to the turning point the gap is
    /// integrated from `V'` so it keeps full relative precision instead of
    /// cancelling.
    pub(crate) fn gap_from_turning(&self, energy: T, turn: T, dist: T, width: T, right: bool, l: T) -> T {
        let gap = if dist < T::lit(0.05) * width {
            if right {
                gauss5(|x| self.potential_dq(x, l), turn - dist, dist)
            } else {
                -gauss5(|x| self.potential_dq(x, l), turn, dist)
            }
        } else {
            let q = if right { turn - dist } else { turn + dist };
            energy - self.potential(q, l)
        };
        gap.max(T::zero())
    }

    /// Position `q(θ) = q₋ + (q₊ − q₋) sin²θ` and `E − V(q)`.
    fn shell_gap(&self, energy: T, (qm, qp): (T, T), theta: T, l: T) -> (T, T) {
        let (s, c) = (theta.sin(), theta.cos());
        let width = qp - qm;
        let (left, right) = (width * s * s, width * c * c);
        let q = qm + left;
        let gap = if left <= right {
            self.gap_from_turning(energy, qm, left, width, false, l)
        } else {
            self.gap_from_turning(energy, qp, right, width, true, l)
        };
        (q, gap)
    }

    fn check_energy(&self, energy: T, lambda: &ParamValue<T>) -> Result<T> {
        let e_min = self.minimum_energy(lambda)?;
        if !(energy > e_min) || !energy.is_finite() {
            return Err(Error::Domain(format!(
                "energy {energy} is not above the potential minimum {e_min} at L = {}",
                lambda.length
            )));
        }
        Ok(e_min)
    }

    /// Turning points `(q₋, q₊)` of the shell; the walls for the box.
    pub fn turning_points(&self, energy: T, lambda: &ParamValue<T>) -> Result<(T, T)> {
        self.check_energy(energy, lambda)?;
        let l = lambda.length;
        match &self.kind {
            SystemKind::Box => Ok((T::zero(), l)),
            SystemKind::PowerLaw { exponent, epsilon } => {
                let x = (energy / *epsilon).powf(T::one() / T::count(*exponent as usize));
                Ok((-x * l, x * l))
            }
            SystemKind::Generic(_) => {
                let qm = self.potential_minimum(lambda)?;
                let xtol = T::default_epsilon() * l * T::lit(4.0);
                let right = expand_and_solve(|x| self.potential(qm + x, l) - energy, T::zero(), l, xtol)?;
                let left = expand_and_solve(|x| self.potential(qm - x, l) - energy, T::zero(), l, xtol)?;
                Ok((qm - left, qm + right))
            }
        }
    }

    pub fn shell(&self, energy: T, lambda: &ParamValue<T>) -> Result<EnergyShell<T>> {
        Ok(EnergyShell {
            energy,
            param: *lambda,
            volume: self.phase_volume(energy, lambda)?,
            turning_points: self.turning_points(energy, lambda)?,
        })
    }

    /// `Ω(E, λ)`, the phase-space area enclosed by the shell.
    pub fn phase_volume(&self, energy: T, lambda: &ParamValue<T>) -> Result<T> {
        self.check_energy(energy, lambda)?;
        let (m, l) = (self.mass, lambda.length);
        match &self.kind {
            SystemKind::Box => Ok(T::lit(2.0) * (T::lit(2.0) * m * energy).sqrt() * l),
            SystemKind::PowerLaw { exponent, epsilon } => {
                let b = T::count(*exponent as usize);
                let c = power_law_constant(*exponent, *epsilon, m);
                Ok(c * l * energy.powf(T::lit(0.5) + T::one() / b))
            }
            SystemKind::Generic(_) => self.phase_volume_quadrature(energy, lambda),
        }
    }

    /// `Ω` by quadrature of `2∫√(2m(E − V)) dq`, for any kind.
    pub fn phase_volume_quadrature(&self, energy: T, lambda: &ParamValue<T>) -> Result<T> {
        let (qm, qp) = self.turning_points(energy, lambda)?;
        let opts = QuadOptions::rel(SHELL_QUAD_TOL);
        let two = T::lit(2.0);
        let m = self.mass;
        if self.is_box() {
            let p = (two * m * energy).sqrt();
            return Ok(two * quadrature::integrate(|_| p, qm, qp, opts)?.value);
        }
        let width = qp - qm;
        let l = lambda.length;
        let integrand = |theta: T| {
            let (_, ke) = self.shell_gap(energy, (qm, qp), theta, l);
            (two * m * ke).sqrt() * width * (two * theta).sin()
        };
        let r = quadrature::integrate(integrand, T::zero(), T::frac_pi_2(), opts)?;
        Ok(two * r.value)
    }

    /// `∂Ω/∂E`
    pub fn dvolume_denergy(&self, energy: T, lambda: &ParamValue<T>) -> Result<T> {
        let e_min = self.check_energy(energy, lambda)?;
        match &self.kind {
            SystemKind::Box | SystemKind::PowerLaw { .. } => {
                let b_term = match &self.kind {
                    SystemKind::PowerLaw { exponent, .. } => T::one() / T::count(*exponent as usize),
                    _ => T::zero(),
                };
                Ok((T::lit(0.5) + b_term) * self.phase_volume(energy, lambda)? / energy)
            }
            SystemKind::Generic(_) => {
                let h = (T::lit(1e-6) * energy.abs())
                    .max(T::lit(1e-9))
                    .min((energy - e_min) * T::lit(0.25));
                let up = self.phase_volume(energy + h, lambda)?;
                let down = self.phase_volume(energy - h, lambda)?;
                Ok((up - down) / (T::lit(2.0) * h))
            }
        }
    }

    /// `∂Ω/∂L` at fixed energy.
    pub fn dvolume_dlength(&self, energy: T, lambda: &ParamValue<T>) -> Result<T> {
        self.check_energy(energy, lambda)?;
        match &self.kind {
            SystemKind::Box | SystemKind::PowerLaw { .. } => Ok(self.phase_volume(energy, lambda)? / lambda.length),
            SystemKind::Generic(_) => {
                let h = T::lit(1e-6) * lambda.length;
                let up = self.phase_volume(energy, &ParamValue::new(lambda.length + h))?;
                let down = self.phase_volume(energy, &ParamValue::new(lambda.length - h))?;
                Ok((up - down) / (T::lit(2.0) * h))
            }
        }
    }

    /// `ω(z; λ) = Ω(H₀(z; λ), λ)`
    pub fn adiabatic_invariant(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> Result<T> {
        if !self.contains(z, lambda) {
            return Err(Error::Domain(format!(
                "phase point ({}, {}) is outside the accessible region at L = {}",
                z.q, z.p, lambda.length
            )));
        }
        self.phase_volume(self.energy(z, lambda), lambda)
    }

    /// `E(Ω, λ)`, the inverse of [`SystemModel::phase_volume`] in energy.
    pub fn shell_energy_from_volume(&self, volume: T, lambda: &ParamValue<T>) -> Result<T> {
        if !(volume > T::zero() && volume.is_finite()) {
            return Err(Error::Domain(format!("phase volume must be positive, got {volume}")));
        }
        let (m, l) = (self.mass, lambda.length);
        match &self.kind {
            SystemKind::Box => Ok(volume * volume / (T::lit(8.0) * m * l * l)),
            SystemKind::PowerLaw { exponent, epsilon } => {
                let b = T::count(*exponent as usize);
                let c = power_law_constant(*exponent, *epsilon, m);
                Ok((volume / (c * l)).powf(T::lit(2.0) * b / (b + T::lit(2.0))))
            }
            SystemKind::Generic(_) => {
                let e_min = self.minimum_energy(lambda)?;
                let mut failure = None;
                let mut f = |e: T| {
                    if e <= e_min {
                        return -volume;
                    }
                    match self.phase_volume(e, lambda) {
                        Ok(v) => v - volume,
                        Err(err) => {
                            failure.get_or_insert(err);
                            T::zero()
                        }
                    }
                };
                let span = e_min.abs().max(T::one());
                let e = expand_and_solve(&mut f, e_min, e_min + span, T::zero())
                    .map_err(|e| Error::Domain(format!("shell energy not bracketed: {e}")))?;
                if let Some(err) = failure {
                    return Err(err);
                }
                Ok(e)
            }
        }
    }

    pub(crate) fn orbit_setup(&self, energy: T, lambda: &ParamValue<T>) -> Result<OrbitSetup<T>> {
        let e_min = self.check_energy(energy, lambda)?;
        let (q_minus, q_plus) = self.turning_points(energy, lambda)?;
        let v_max = (T::lit(2.0) * (energy - e_min) / self.mass).sqrt();
        let time_scale = T::lit(2.0) * (q_plus - q_minus) / v_max;
        Ok(OrbitSetup {
            q_minus,
            q_plus,
            time_scale,
            ctrl: StepControl::adaptive(ORBIT_TOL, time_scale / T::lit(32.0)),
            t_tol: T::tol(1e-14) * time_scale,
        })
    }

    /// Right-hand side of the unperturbed Hamilton equations.
    pub(crate) fn flow(&self, q: T, p: T, length: T) -> (T, T) {
        (p / self.mass, -self.potential_dq(q, length))
    }

    /// Integrate `observable` over one period of the `H₀` orbit started at the
    /// right turning point. The period is located from the two sign changes of `p`.
    pub fn orbit_average<F>(&self, observable: F, energy: T, lambda: &ParamValue<T>) -> Result<OrbitAverage<T>>
    where
        F: Fn(PhasePoint<T>) -> T,
    {
        let setup = self.orbit_setup(energy, lambda)?;
        let l = lambda.length;
        if self.is_box() {
            let p = (T::lit(2.0) * self.mass * energy).sqrt();
            let opts = QuadOptions::rel(SHELL_QUAD_TOL);
            let both = |q: T| observable(PhasePoint::new(q, p)) + observable(PhasePoint::new(q, -p));
            let total = quadrature::integrate(both, T::zero(), l, opts)?.value;
            return Ok(OrbitAverage {
                period: T::lit(2.0) * self.mass * l / p,
                mean: total / (T::lit(2.0) * l),
            });
        }
        let rhs = |_t: T, y: &[T; 3]| {
            let (dq, dp) = self.flow(y[0], y[1], l);
            [dq, dp, observable(PhasePoint::new(y[0], y[1]))]
        };
        let t_max = setup.time_scale * T::lit(1000.0);
        let shot = |t0: T, y0: [T; 3], direction: i8| {
            ode::integrate_to_crossing(&rhs, t0, y0, |y| y[1], direction, t0 + t_max, setup.ctrl, setup.t_tol)?
                .crossed()
                .ok_or_else(|| Error::numerical("orbit period", format!("no turning point found within t = {t_max}")))
        };
        let (t_half, y_half) = shot(T::zero(), [setup.q_plus, T::zero(), T::zero()], 1)?;
        let (period, y_end) = shot(t_half, y_half, -1)?;
        let closure = (y_end[0] - setup.q_plus).abs();
        if closure > T::tol(1e-6) * (setup.q_plus - setup.q_minus) {
            return Err(Error::numerical(
                "orbit period",
                format!("orbit does not close: |q(τ) − q₊| = {closure}"),
            ));
        }
        Ok(OrbitAverage {
            period,
            mean: y_end[2] / period,
        })
    }

    /// Orbit period `τ(E, λ)`.
    pub fn period(&self, energy: T, lambda: &ParamValue<T>) -> Result<T> {
        Ok(self.orbit_average(|_| T::zero(), energy, lambda)?.period)
    }

    /// `⟨A⟩_{E,λ}` as a time average over one orbit.
    pub fn microcanonical_average<F>(&self, observable: F, energy: T, lambda: &ParamValue<T>) -> Result<T>
    where
        F: Fn(PhasePoint<T>) -> T,
    {
        Ok(self.orbit_average(observable, energy, lambda)?.mean)
    }

    /// `⟨A⟩_{E,λ} = ∮ A |p|⁻¹ dq / ∮ |p|⁻¹ dq`, evaluated with the `sin²θ` substitution.
    pub fn microcanonical_average_line<F>(&self, observable: F, energy: T, lambda: &ParamValue<T>) -> Result<T>
    where
        F: Fn(PhasePoint<T>) -> T,
    {
        let (qm, qp) = self.turning_points(energy, lambda)?;
        let opts = QuadOptions::rel(SHELL_QUAD_TOL);
        let two = T::lit(2.0);
        let (m, l) = (self.mass, lambda.length);
        if self.is_box() {
            return self.orbit_average(observable, energy, lambda).map(|a| a.mean);
        }
        let width = qp - qm;
        let weighted = |theta: T, with_obs: bool| {
            let (q, ke) = self.shell_gap(energy, (qm, qp), theta, l);
            let p = (two * m * ke).sqrt();
            if p == T::zero() {
                return T::zero();
            }
            let a = if with_obs {
                observable(PhasePoint::new(q, p)) + observable(PhasePoint::new(q, -p))
            } else {
                two
            };
            a * width * (two * theta).sin() / p
        };
        let num = quadrature::integrate(|th| weighted(th, true), T::zero(), T::frac_pi_2(), opts)?.value;
        let den = quadrature::integrate(|th| weighted(th, false), T::zero(), T::frac_pi_2(), opts)?.value;
        Ok(num / den)
    }

    /// `⟨∂H₀/∂L⟩_{E,λ}`. For the box the force is the wall impulse, giving `−2E/L`.
    pub fn mean_grad_lambda(&self, energy: T, lambda: &ParamValue<T>) -> Result<T> {
        if self.is_box() {
            self.check_energy(energy, lambda)?;
            return Ok(-T::lit(2.0) * energy / lambda.length);
        }
        self.microcanonical_average(|z| self.grad_lambda(&z, lambda), energy, lambda)
    }

    /// `∂E(Ω, λ)/∂L = −(∂Ω/∂L)/(∂Ω/∂E)`.
    pub fn grad_shell_energy(&self, volume: T, lambda: &ParamValue<T>) -> Result<T> {
        let e = self.shell_energy_from_volume(volume, lambda)?;
        Ok(-self.dvolume_dlength(e, lambda)? / self.dvolume_denergy(e, lambda)?)
    }

    /// Both sides of the cyclic identity `∂_L E(Ω, λ) = ⟨∂_L H₀⟩_{E,λ}`;
    /// errors if they differ by more than `1e-6` relative.
    pub fn grad_shell_energy_checked(&self, volume: T, lambda: &ParamValue<T>) -> Result<(T, T)> {
        let cyclic = self.grad_shell_energy(volume, lambda)?;
        let e = self.shell_energy_from_volume(volume, lambda)?;
        let average = self.mean_grad_lambda(e, lambda)?;
        let scale = cyclic.abs().max(average.abs()).max(T::default_epsilon());
        if (cyclic - average).abs() > T::tol(1e-6) * scale {
            return Err(Error::numerical(
                "cyclic identity",
                format!("-dΩ/dL / dΩ/dE = {cyclic} but <dH0/dL> = {average}"),
            ));
        }
        Ok((cyclic, average))
    }

    /// Shell points at the given fractions of the period (each in `[0, 1)`),
    /// measured in time from the right turning point. For the box the origin
    /// is the right wall just after reflection.
    pub fn shell_points(&self, energy: T, lambda: &ParamValue<T>, fractions: &[T]) -> Result<Vec<PhasePoint<T>>> {
        let l = lambda.length;
        if self.is_box() {
            self.check_energy(energy, lambda)?;
            let p = (T::lit(2.0) * self.mass * energy).sqrt();
            let half = T::lit(0.5);
            return Ok(fractions
                .iter()
                .map(|&s| {
                    let s = s - s.floor();
                    if s < half {
                        PhasePoint::new(l * (T::one() - T::lit(2.0) * s), -p)
                    } else {
                        PhasePoint::new(l * (T::lit(2.0) * s - T::one()), p)
                    }
                })
                .collect());
        }
        let setup = self.orbit_setup(energy, lambda)?;
        let period = self.period(energy, lambda)?;
        let rhs = |_t: T, y: &[T; 2]| {
            let (dq, dp) = self.flow(y[0], y[1], l);
            [dq, dp]
        };
        let mut order: Vec<usize> = (0..fractions.len()).collect();
        let frac = |i: usize| fractions[i] - fractions[i].floor();
        order.sort_by(|&a, &b| frac(a).partial_cmp(&frac(b)).expect("finite fractions"));
        let mut out = vec![PhasePoint::new(T::zero(), T::zero()); fractions.len()];
        let (mut t, mut y) = (T::zero(), [setup.q_plus, T::zero()]);
        let mut h = setup.ctrl.initial_step();
        for i in order {
            let target = frac(i) * period;
            if target > t {
                let (y1, h1) = ode::integrate(&rhs, t, y, target, setup.ctrl, h)?;
                y = y1;
                h = h1;
                t = target;
            }
            out[i] = PhasePoint::new(y[0], y[1]);
        }
        Ok(out)
    }
}
