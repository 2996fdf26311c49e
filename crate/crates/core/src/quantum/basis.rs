//! The box in its instantaneous eigenbasis `φ_n(q; L) = √(2/L) sin(nπq/L)`.
//!
//! Coefficients obey `iℏ ċ_n = E_n c_n + L̇ Σ_m (ξ_nm − iℏ⟨n|∂_L m⟩) c_m`. The
//! diagonal part is removed by the interaction picture `c_n = e^{−i n² Φ} b_n`
//! with `Φ̇ = E_1(L)/ℏ` carried as an extra state variable. Quantum numbers in
//! this module are 1-based where they appear as arguments; coefficient vectors
//! are indexed from 0.

use std::io::Write;

use nalgebra::DMatrix;

use super::operator::{c, cabs, re, GridSpec, QuantumState, C};
use crate::error::{Error, Result};
use crate::model::{Schedule, SystemModel};
use crate::numerics::quadrature::{self, QuadOptions};
use crate::scalar::Real;

/// `∫₀^a sin(kq) ... ` helper: `sin(k a)/k`, with the `k → 0` limit `a`.
fn sin_over<T: Real>(k: T, a: T) -> T {
    if k.abs() * a < T::tol(1e-8) {
        a
    } else {
        (k * a).sin() / k
    }
}

/// `⟨n(L)|m(L')⟩` for 1-based `n`, `m`.
pub fn box_overlap<T: Real>(n: usize, l: T, m: usize, l2: T) -> T {
    let pi = T::pi();
    let alpha = T::count(n) * pi / l;
    let beta = T::count(m) * pi / l2;
    let a = l.min(l2);
    let integral = (sin_over(alpha - beta, a) - sin_over(alpha + beta, a)) * T::lit(0.5);
    T::lit(2.0) / (l * l2).sqrt() * integral
}

/// `L ⟨n|∂_L m⟩` for levels `1..=n_levels`, from central differences of
/// overlaps at `L = 1` with step `1e-6`, antisymmetrized. The matrix scales
/// exactly as `1/L`, so one evaluation serves every length.
pub fn box_connection<T: Real>(n_levels: usize) -> DMatrix<T> {
    let d = T::lit(1e-6);
    let raw = DMatrix::from_fn(n_levels, n_levels, |i, j| {
        (box_overlap(i + 1, T::one(), j + 1, T::one() + d) - box_overlap(i + 1, T::one(), j + 1, T::one() - d))
            / (T::lit(2.0) * d)
    });
    (&raw - raw.transpose()) * T::lit(0.5)
}

/// `E_n(L) = n²π²ℏ²/(2mL²)`
pub fn box_energy<T: Real>(n: usize, length: T, mass: T, hbar: T) -> T {
    let k = T::count(n) * T::pi() * hbar / length;
    k * k / (T::lit(2.0) * mass)
}

/// `−(1/ℏ) ∫₀^t E_n(L(t')) dt'` by adaptive quadrature.
pub fn exact_box_phase<T: Real>(n: usize, schedule: &Schedule<T>, t: T, mass: T, hbar: T) -> Result<T> {
    if n == 0 {
        return Err(Error::Precondition("box quantum numbers start at 1".into()));
    }
    if !(t >= T::zero() && t <= schedule.duration()) {
        return Err(Error::Precondition(format!("time {t} outside [0, {}]", schedule.duration())));
    }
    if t == T::zero() {
        return Ok(T::zero());
    }
    let r = quadrature::integrate(
        |s: T| box_energy(n, schedule.value(s).length, mass, hbar),
        T::zero(),
        t,
        QuadOptions::rel(1e-12),
    )?;
    Ok(-r.value / hbar)
}

/// `√(2/L) sin(nπq/L) exp(−(i/ℏ)∫E_n dt)` sampled on `grid` (zero beyond `L(t)`).
pub fn exact_box_state<T: Real>(
    n: usize,
    schedule: &Schedule<T>,
    t: T,
    grid: &GridSpec<T>,
    mass: T,
    hbar: T,
) -> Result<QuantumState<T>> {
    let phase = exact_box_phase(n, schedule, t, mass, hbar)?;
    let l = schedule.value(t).length;
    let amp = (T::lit(2.0) / l).sqrt();
    let k = T::count(n) * T::pi() / l;
    let rot = c(phase.cos(), phase.sin());
    let amplitudes = grid
        .positions()
        .into_iter()
        .map(|q| if q >= T::zero() && q <= l { rot * re(amp * (k * q).sin()) } else { re(T::zero()) })
        .collect();
    Ok(QuantumState::Grid { grid: *grid, amplitudes })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisPropagation<T> {
    pub n_levels: usize,
    pub with_cd: bool,
    /// Local tolerance of the step-doubling RK4 integrator.
    pub tol: T,
    pub samples: usize,
    pub hbar: T,
}

impl<T: Real> BasisPropagation<T> {
    pub fn new(n_levels: usize, with_cd: bool) -> Self {
        BasisPropagation { n_levels, with_cd, tol: T::tol(1e-12), samples: 100, hbar: T::one() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisTrajectory<T> {
    pub times: Vec<T>,
    /// `Φ(t) = (1/ℏ)∫ E_1 dt`
    pub phi: Vec<T>,
    /// Schrödinger-picture coefficients `c_n(t)`.
    pub coefficients: Vec<Vec<C<T>>>,
    /// `arg b_n(t)`, unwrapped in time.
    unwrapped_arg: Vec<Vec<T>>,
    /// Set when the top quarter of the basis holds more than `1e-3` of the
    /// population, or the retained norm falls below `0.999`.
    pub leakage_warning: bool,
    pub with_cd: bool,
}

impl<T: Real> BasisTrajectory<T> {
    pub fn populations(&self, index: usize) -> Vec<T> {
        self.coefficients.iter().map(|c| c[index].norm_sqr()).collect()
    }

    /// Unwrapped `arg c_n(t)` for coefficient index `index` (level `index + 1`).
    pub fn phase(&self, index: usize) -> Vec<T> {
        let n2 = T::count((index + 1) * (index + 1));
        self.phi
            .iter()
            .zip(&self.unwrapped_arg)
            .map(|(phi, args)| -n2 * *phi + args[index])
            .collect()
    }

    /// `max_{t, n} | |c_n(t)|² − |c_n(0)|² |`
    pub fn max_population_drift(&self) -> T {
        let first = &self.coefficients[0];
        self.coefficients.iter().fold(T::zero(), |acc, cs| {
            cs.iter()
                .zip(first)
                .fold(acc, |a, (x, y)| a.max((x.norm_sqr() - y.norm_sqr()).abs()))
        })
    }

    pub fn norm(&self, k: usize) -> T {
        self.coefficients[k].iter().fold(T::zero(), |a, z| a + z.norm_sqr())
    }

    /// Columns `t,fidelity,norm,phase,p0,…` with fidelity and phase of `index`.
    pub fn write_csv<W: Write>(&self, index: usize, leading: usize, mut w: W) -> std::io::Result<()> {
        let leading = leading.min(self.coefficients[0].len());
        write!(w, "t,fidelity,norm,phase")?;
        for k in 0..leading {
            write!(w, ",p{k}")?;
        }
        writeln!(w)?;
        let phase = self.phase(index);
        for (i, cs) in self.coefficients.iter().enumerate() {
            write!(w, "{},{},{},{}", self.times[i], cs[index].norm_sqr(), self.norm(i), phase[i])?;
            for z in cs.iter().take(leading) {
                write!(w, ",{}", z.norm_sqr())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

struct State<T> {
    phi: T,
    b: Vec<C<T>>,
}

/// Evolve `c0` (indexed from level 1) under the box Hamiltonian with moving wall.
pub fn propagate_basis<T: Real>(
    system: &SystemModel<T>,
    schedule: &Schedule<T>,
    c0: &[C<T>],
    cfg: &BasisPropagation<T>,
) -> Result<BasisTrajectory<T>> {
    if !system.is_box() {
        return Err(Error::Precondition("eigenbasis propagation is implemented for the box".into()));
    }
    let n = cfg.n_levels;
    if c0.len() != n || n == 0 {
        return Err(Error::Precondition(format!("expected {n} coefficients, got {}", c0.len())));
    }
    let norm0 = c0.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
    if (norm0 - T::one()).abs() > T::tol(1e-10) {
        return Err(Error::Precondition(format!("initial coefficients are not normalized (Σ|c|² = {norm0})")));
    }
    if cfg.samples == 0 {
        return Err(Error::Precondition("at least one sampling interval is required".into()));
    }
    let (mass, hbar) = (system.mass(), cfg.hbar);
    // L · ⟨n|∂_L m⟩, and L · (ξ − iℏ⟨n|∂_L m⟩).
    let a = box_connection::<T>(n);
    let coupling = DMatrix::from_fn(n, n, |i, j| {
        let conn = c(T::zero(), hbar * a[(i, j)]);
        let xi = if cfg.with_cd && i != j { conn } else { re(T::zero()) };
        xi - conn
    });
    let inactive = coupling.iter().all(|z| *z == re(T::zero()));
    let squares: Vec<T> = (1..=n).map(|k| T::count(k * k)).collect();

    let rhs = |t: T, s: &State<T>| -> State<T> {
        let lam = schedule.value(t).length;
        let rate = schedule.rate(t).length;
        let dphi = box_energy(1, lam, mass, hbar) / hbar;
        if inactive || rate == T::zero() {
            return State { phi: dphi, b: vec![re(T::zero()); n] };
        }
        let rot: Vec<C<T>> = squares.iter().map(|&k2| c((k2 * s.phi).cos(), (k2 * s.phi).sin())).collect();
        let c_now: Vec<C<T>> = s.b.iter().zip(&rot).map(|(b, r)| *b * r.conj()).collect();
        let pre = c(T::zero(), -rate / (hbar * lam));
        let db = (0..n)
            .map(|i| {
                let mut acc = re(T::zero());
                for j in 0..n {
                    acc += coupling[(i, j)] * c_now[j];
                }
                pre * rot[i] * acc
            })
            .collect();
        State { phi: dphi, b: db }
    };

    let big_t = schedule.duration();
    let mut times = Vec::with_capacity(cfg.samples + 1);
    let mut phi = Vec::with_capacity(cfg.samples + 1);
    let mut coefficients: Vec<Vec<C<T>>> = Vec::with_capacity(cfg.samples + 1);
    let mut unwrapped_arg: Vec<Vec<T>> = Vec::with_capacity(cfg.samples + 1);
    let two_pi = T::two_pi();
    let mut push = |t: T, s: &State<T>| {
        let args: Vec<T> = s
            .b
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let mut a = z.im.atan2(z.re);
                if let Some(prev) = unwrapped_arg.last() {
                    a += two_pi * ((prev[k] - a) / two_pi).round();
                }
                a
            })
            .collect();
        times.push(t);
        phi.push(s.phi);
        coefficients.push(
            s.b.iter()
                .zip(&squares)
                .map(|(b, &k2)| *b * c((k2 * s.phi).cos(), -(k2 * s.phi).sin()))
                .collect(),
        );
        unwrapped_arg.push(args);
    };

    let mut state = State { phi: T::zero(), b: c0.to_vec() };
    push(T::zero(), &state);
    let mut t = T::zero();
    let mut h = big_t / T::count(cfg.samples) / T::lit(4.0);
    for k in 1..=cfg.samples {
        let target = if k == cfg.samples { big_t } else { big_t * T::count(k) / T::count(cfg.samples) };
        while t < target {
            let trial = h.min(target - t);
            let (next, used, suggested) = adaptive_step(&rhs, t, &state, trial, cfg.tol)?;
            state = next;
            t = if used == target - t { target } else { t + used };
            h = suggested;
        }
        push(target, &state);
    }
    let last = &coefficients[coefficients.len() - 1];
    let kept: T = last.iter().fold(T::zero(), |a, z: &C<T>| a + z.norm_sqr());
    let top: T = last[n - n / 4..].iter().fold(T::zero(), |a, z| a + z.norm_sqr());
    let leakage_warning = kept < T::lit(0.999) || (n >= 4 && top > T::lit(1e-3));
    Ok(BasisTrajectory { times, phi, coefficients, unwrapped_arg, leakage_warning, with_cd: cfg.with_cd })
}

fn axpy<T: Real>(s: &State<T>, a: T, k: &State<T>) -> State<T> {
    State {
        phi: s.phi + a * k.phi,
        b: s.b.iter().zip(&k.b).map(|(x, y)| *x + *y * re(a)).collect(),
    }
}

fn rk4<T: Real, F: Fn(T, &State<T>) -> State<T>>(f: &F, t: T, s: &State<T>, h: T) -> State<T> {
    let half = h * T::lit(0.5);
    let k1 = f(t, s);
    let k2 = f(t + half, &axpy(s, half, &k1));
    let k3 = f(t + half, &axpy(s, half, &k2));
    let k4 = f(t + h, &axpy(s, h, &k3));
    let w = h / T::lit(6.0);
    State {
        phi: s.phi + w * (k1.phi + T::lit(2.0) * (k2.phi + k3.phi) + k4.phi),
        b: (0..s.b.len())
            .map(|i| s.b[i] + (k1.b[i] + (k2.b[i] + k3.b[i]) * re(T::lit(2.0)) + k4.b[i]) * re(w))
            .collect(),
    }
}

/// Step doubling on the vector state; returns (state, step used, next step).
fn adaptive_step<T: Real, F: Fn(T, &State<T>) -> State<T>>(f: &F, t: T, s: &State<T>, h: T, tol: T) -> Result<(State<T>, T, T)> {
    let mut h = h;
    let floor = T::default_epsilon() * (T::one() + t.abs()) * T::lit(16.0);
    loop {
        let coarse = rk4(f, t, s, h);
        let half = h * T::lit(0.5);
        let fine = rk4(f, t + half, &rk4(f, t, s, half), half);
        let mut err = (fine.phi - coarse.phi).abs();
        for (x, y) in fine.b.iter().zip(&coarse.b) {
            err = err.max(cabs(*x - *y));
        }
        err /= T::lit(15.0);
        if err <= tol && err.is_finite() {
            let grow = if err == T::zero() {
                T::lit(4.0)
            } else {
                (T::lit(0.9) * (tol / err).powf(T::lit(0.2))).min(T::lit(4.0)).max(T::one())
            };
            return Ok((fine, h, h * grow));
        }
        let shrink = if err.is_finite() { (T::lit(0.9) * (tol / err).powf(T::lit(0.2))).max(T::lit(0.1)) } else { T::lit(0.1) };
        h *= shrink.min(T::lit(0.5));
        if h < floor {
            return Err(Error::numerical("basis rk4", format!("step underflow at t = {t}")));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ground(n: usize) -> Vec<C<f64>> {
        let mut v = vec![re(0.0); n];
        v[0] = re(1.0);
        v
    }

    #[test]
    fn connection_matches_closed_form() {
        let a = box_connection::<f64>(8);
        for i in 0..8 {
            for j in 0..8 {
                let (n, m) = ((i + 1) as f64, (j + 1) as f64);
                let exact = if i == j {
                    0.0
                } else {
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * 2.0 * n * m / (n * n - m * m)
                };
                assert!((a[(i, j)] - exact).abs() < 1e-8, "({i},{j}) {} vs {exact}", a[(i, j)]);
            }
        }
    }

    #[test]
    fn overlaps_are_orthonormal_at_equal_length() {
        for n in 1..6 {
            for m in 1..6 {
                let o: f64 = box_overlap(n, 1.7, m, 1.7);
                assert!((o - if n == m { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exact_phase_examples() {
        let c1 = Schedule::constant(1.0, 1.0).unwrap();
        assert!((exact_box_phase(1, &c1, 1.0, 1.0, 1.0).unwrap() + PI * PI / 2.0).abs() < 1e-12);
        let lin = Schedule::linear(1.0, 2.0, 1.0).unwrap();
        assert!((exact_box_phase(1, &lin, 1.0, 1.0, 1.0).unwrap() + PI * PI / 4.0).abs() < 1e-12);
        let g = GridSpec::new(0.0, 1.0, 64).unwrap();
        let s = exact_box_state(1, &lin, 0.0, &g, 1.0, 1.0).unwrap();
        for (q, a) in g.positions().iter().zip(s.amplitudes()) {
            assert!((a.re - 2f64.sqrt() * (PI * q).sin()).abs() < 1e-14 && a.im == 0.0);
        }
    }

    #[test]
    fn cd_basis_run_matches_exact_phase() {
        let sys = SystemModel::hard_box(1.0).unwrap();
        for sched in [Schedule::constant(1.0, 1.0).unwrap(), Schedule::linear(1.0, 2.0, 1.0).unwrap()] {
            let traj = propagate_basis(&sys, &sched, &ground(16), &BasisPropagation::new(16, true)).unwrap();
            let phase = traj.phase(0);
            for (t, ph) in traj.times.iter().zip(&phase) {
                let exact = exact_box_phase(1, &sched, *t, 1.0, 1.0).unwrap();
                assert!((ph - exact).abs() < 1e-8, "t={t}: {ph} vs {exact}");
            }
            assert!(traj.max_population_drift() < 1e-12);
            assert!(!traj.leakage_warning);
        }
    }

    #[test]
    fn bare_fast_expansion_excites_the_box() {
        let sys = SystemModel::hard_box(1.0).unwrap();
        let sched = Schedule::linear(1.0, 2.0, 0.05).unwrap();
        let p = |n: usize| {
            let cfg = BasisPropagation { samples: 10, tol: 1e-10, ..BasisPropagation::new(n, false) };
            let traj = propagate_basis(&sys, &sched, &ground(n), &cfg).unwrap();
            traj.populations(0)[10]
        };
        let (p32, p64) = (p(32), p(64));
        assert!(p64 < 0.99, "{p64}");
        assert!((p32 - p64).abs() < 5e-3, "{p32} vs {p64}");
    }

    #[test]
    fn rejects_bad_input() {
        let sys = SystemModel::hard_box(1.0).unwrap();
        let sched = Schedule::constant(1.0, 1.0).unwrap();
        assert!(propagate_basis(&sys, &sched, &ground(3), &BasisPropagation::new(4, true)).is_err());
        assert!(propagate_basis(&sys, &sched, &[re(2.0), re(0.0)], &BasisPropagation::new(2, true)).is_err());
        let pl = SystemModel::power_law(2, 1.0, 1.0).unwrap();
        assert!(propagate_basis(&pl, &sched, &ground(2), &BasisPropagation::new(2, true)).is_err());
        assert!(exact_box_phase(0, &sched, 0.5, 1.0, 1.0).is_err());
    }
}
