//! Cayley propagation of grid wavefunctions under `Ĥ₀(λ(t)) + λ̇ ξ̂(λ(t))`.

use std::io::Write;

use super::operator::{c, h0_tridiagonal, re, xi_dilation_tridiagonal, GridSpec, QuantumState, Tridiagonal, C};
use super::spectrum::{lowest_levels, EigenSystem};
use crate::error::{Error, Result};
use crate::model::{ParamValue, Schedule, SystemKind, SystemModel};
use crate::numerics::tridiag;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPropagation<T> {
    pub dt: T,
    /// Level whose fidelity and phase are tracked.
    pub level: usize,
    /// Number of leading populations recorded.
    pub populations: usize,
    /// Record every this many steps (the final step is always recorded).
    pub record_every: usize,
    /// Store `|ψ|²` every this many records.
    pub density_every: Option<usize>,
    pub hbar: T,
}

impl<T: Real> GridPropagation<T> {
    pub fn new(dt: T) -> Self {
        GridPropagation {
            dt,
            level: 0,
            populations: 4,
            record_every: 1,
            density_every: None,
            hbar: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTrajectory<T: Real> {
    pub grid: GridSpec<T>,
    pub level: usize,
    pub times: Vec<T>,
    pub fidelity: Vec<T>,
    pub norm: Vec<T>,
    /// Unwrapped `arg⟨n(λ(t))|ψ(t)⟩`.
    pub phase: Vec<T>,
    pub populations: Vec<Vec<T>>,
    pub densities: Vec<(T, Vec<T>)>,
    /// Largest `|‖ψ‖² − 1|` after any single step.
    pub max_norm_error: T,
    pub steps: usize,
    pub final_state: QuantumState<T>,
}

impl<T: Real> GridTrajectory<T> {
    pub fn min_fidelity(&self) -> T {
        self.fidelity.iter().fold(T::one(), |a, &f| a.min(f))
    }

    pub fn final_fidelity(&self) -> T {
        self.fidelity[self.fidelity.len() - 1]
    }

    /// Columns `t,fidelity,norm,phase,p0,…`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t,fidelity,norm,phase")?;
        for k in 0..self.populations.first().map_or(0, |p| p.len()) {
            write!(w, ",p{k}")?;
        }
        writeln!(w)?;
        for i in 0..self.times.len() {
            write!(w, "{},{},{},{}", self.times[i], self.fidelity[i], self.norm[i], self.phase[i])?;
            for p in &self.populations[i] {
                write!(w, ",{p}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Little-endian binary dump: `u64` snapshot count, `u64` grid size, the
    /// grid positions as `f64`, then per snapshot the time followed by `|ψ|²`.
    pub fn write_density_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.densities.len() as u64).to_le_bytes())?;
        w.write_all(&(self.grid.n_points as u64).to_le_bytes())?;
        for q in self.grid.positions() {
            w.write_all(&q.as_f64().to_le_bytes())?;
        }
        for (t, d) in &self.densities {
            w.write_all(&t.as_f64().to_le_bytes())?;
            for x in d {
                w.write_all(&x.as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

type Builder<'a, T> = &'a dyn Fn(&ParamValue<T>) -> Result<Tridiagonal<T>>;

/// One Cayley step `(1 + i dt H/2ℏ) ψ' = (1 − i dt H/2ℏ) ψ`.
fn cayley_step<T: Real>(h: &Tridiagonal<T>, psi: &[C<T>], dt: T, hbar: T) -> Result<Vec<C<T>>> {
    let a = c(T::zero(), dt / (T::lit(2.0) * hbar));
    let hpsi = h.apply(psi);
    let rhs: Vec<C<T>> = psi.iter().zip(&hpsi).map(|(p, hp)| *p - a * hp).collect();
    let one = re(T::one());
    let diag: Vec<C<T>> = h.diag.iter().map(|d| one + a * d).collect();
    let upper: Vec<C<T>> = h.upper.iter().map(|u| a * u).collect();
    let lower: Vec<C<T>> = h.upper.iter().map(|u| a * u.conj()).collect();
    tridiag::solve_complex(&lower, &diag, &upper, &rhs)
}

/// Propagate `psi0` on its grid from `t = 0` to `T` with midpoint Hamiltonians
/// `Ĥ₀(λ(t+dt/2)) + λ̇ ξ̂(λ(t+dt/2))`. Fidelity and phase are measured against
/// the instantaneous eigenstates of `h0`.
pub fn propagate_grid<T: Real>(
    h0: Builder<'_, T>,
    xi: Option<Builder<'_, T>>,
    schedule: &Schedule<T>,
    psi0: &QuantumState<T>,
    cfg: &GridPropagation<T>,
) -> Result<GridTrajectory<T>> {
    let QuantumState::Grid { grid, amplitudes } = psi0 else {
        return Err(Error::Precondition("grid propagation needs a grid state".into()));
    };
    let grid = *grid;
    if !(cfg.dt > T::zero()) || cfg.record_every == 0 {
        return Err(Error::Precondition("time step and record cadence must be positive".into()));
    }
    let n0 = grid.norm_sqr(amplitudes);
    if (n0 - T::one()).abs() > T::tol(1e-10) {
        return Err(Error::Precondition(format!("initial state is not normalized (‖ψ‖² = {n0})")));
    }
    let big_t = schedule.duration();
    let steps = (big_t / cfg.dt).ceil().to_usize().unwrap_or(1).max(1);
    let dt = big_t / T::count(steps);
    let n_eig = (cfg.level + 1).max(cfg.populations).max(1);

    let mut cache: Option<(T, EigenSystem<T>)> = None;
    let mut eig_at = |lam: ParamValue<T>| -> Result<EigenSystem<T>> {
        if let Some((l, e)) = &cache {
            if *l == lam.length {
                return Ok(e.clone());
            }
        }
        let e = lowest_levels(&h0(&lam)?, n_eig, Some(lam))?;
        cache = Some((lam.length, e.clone()));
        Ok(e)
    };

    let mut traj = GridTrajectory {
        grid,
        level: cfg.level,
        times: Vec::new(),
        fidelity: Vec::new(),
        norm: Vec::new(),
        phase: Vec::new(),
        populations: Vec::new(),
        densities: Vec::new(),
        max_norm_error: T::zero(),
        steps,
        final_state: psi0.clone(),
    };
    let two_pi = T::two_pi();
    let record = |traj: &mut GridTrajectory<T>, t: T, psi: &[C<T>], eig: &EigenSystem<T>| {
        let state = QuantumState::Grid { grid, amplitudes: psi.to_vec() };
        let ov = eig.overlap(&state, cfg.level);
        let mut ph = ov.im.atan2(ov.re);
        if let Some(&prev) = traj.phase.last() {
            ph += two_pi * ((prev - ph) / two_pi).round();
        }
        traj.times.push(t);
        traj.fidelity.push(ov.norm_sqr());
        traj.norm.push(grid.norm_sqr(psi));
        traj.phase.push(ph);
        traj.populations
            .push((0..cfg.populations.min(eig.len())).map(|k| eig.overlap(&state, k).norm_sqr()).collect());
        if let Some(every) = cfg.density_every {
            if (traj.times.len() - 1) % every.max(1) == 0 {
                traj.densities.push((t, psi.iter().map(|z| z.norm_sqr()).collect()));
            }
        }
    };

    let mut psi = amplitudes.clone();
    let e0 = eig_at(schedule.value(T::zero()))?;
    record(&mut traj, T::zero(), &psi, &e0);
    let mut prev_norm = n0;
    for k in 0..steps {
        let t = dt * T::count(k);
        let tm = t + dt * T::lit(0.5);
        let lam = schedule.value(tm);
        let mut h = h0(&lam)?;
        if let Some(xb) = xi {
            let rate = schedule.rate(tm).length;
            if rate != T::zero() {
                h = h.add_scaled(rate, &xb(&lam)?);
            }
        }
        psi = cayley_step(&h, &psi, dt, cfg.hbar)?;
        let norm = grid.norm_sqr(&psi);
        traj.max_norm_error = traj.max_norm_error.max((norm - prev_norm).abs());
        prev_norm = norm;
        if (k + 1) % cfg.record_every == 0 || k + 1 == steps {
            let t1 = if k + 1 == steps { big_t } else { dt * T::count(k + 1) };
            let eig = eig_at(schedule.value(t1))?;
            record(&mut traj, t1, &psi, &eig);
        }
    }
    traj.final_state = QuantumState::Grid { grid, amplitudes: psi };
    Ok(traj)
}

/// Grid propagation for a power-law well on a fixed domain, with or without
/// the dilation `ξ̂ = (b/(b+2)) (q̂p̂ + p̂q̂)/2L`. Moving-wall box propagation is
/// not supported on a fixed grid; use the eigenbasis propagator instead.
pub fn propagate_power_law<T: Real>(
    system: &SystemModel<T>,
    schedule: &Schedule<T>,
    grid: &GridSpec<T>,
    psi0: &QuantumState<T>,
    cfg: &GridPropagation<T>,
    with_cd: bool,
) -> Result<GridTrajectory<T>> {
    let SystemKind::PowerLaw { .. } = system.kind() else {
        return Err(Error::Precondition(format!("grid propagation needs a power-law system, got {}", system.tag())));
    };
    let mu = system.dilation_coefficient().expect("power laws have a dilation coefficient");
    let hbar = cfg.hbar;
    let h0 = |lam: &ParamValue<T>| h0_tridiagonal(system, lam, grid, hbar);
    let xi = |lam: &ParamValue<T>| Ok(xi_dilation_tridiagonal(lam.length, mu, grid, hbar));
    propagate_grid(&h0, with_cd.then_some(&xi as Builder<'_, T>), schedule, psi0, cfg)
}

/// `2πℏ/(E₁ − E₀)` of the grid Hamiltonian at `λ`.
pub fn natural_period<T: Real>(system: &SystemModel<T>, lambda: &ParamValue<T>, grid: &GridSpec<T>, hbar: T) -> Result<T> {
    let e = lowest_levels(&h0_tridiagonal(system, lambda, grid, hbar)?, 2, Some(*lambda))?;
    Ok(T::two_pi() * hbar / (e.energies[1] - e.energies[0]))
}
