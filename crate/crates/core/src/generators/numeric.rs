use std::io::{self, Write};

use super::{Generator, Provenance};
use crate::error::{Error, Result};
use crate::model::{ParamValue, PhasePoint, SystemModel};
use crate::numerics::ode;
use crate::numerics::quadrature::{self, QuadOptions};
use crate::numerics::spline::PeriodicSpline;
use crate::scalar::Real;

const XI_QUAD_TOL: f64 = 1e-12;

/// Pointwise generator for a smooth confining potential.
///
/// On the shell through `z`, `ξ` is odd in `p` and vanishes at the turning
/// points; along the orbit `dξ/dt = g(q) = ∂_L V − ⟨∂_L V⟩`, so
/// `ξ(q, p) = −sgn(p) m ∫_q^{q₊} g(q')/|p(q')| dq'`. The equivalent form
/// `sgn(p) m ∫_{q₋}^q g/|p| dq'` is used on the left half of the shell.
/// Gradients are fourth-order central differences.
#[derive(Clone)]
pub struct NumericGenerator<T> {
    system: SystemModel<T>,
    /// Finite-difference step relative to the shell width (position) and
    /// momentum scale.
    fd_rel: T,
}

impl<T: Real> std::fmt::Debug for NumericGenerator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NumericGenerator({})", self.system.tag())
    }
}

impl<T: Real> NumericGenerator<T> {
    pub fn new(system: SystemModel<T>) -> Result<Self> {
        if system.is_box() {
            return Err(Error::Precondition(
                "the hard-wall box has no smooth potential gradient; use the dilation generator".into(),
            ));
        }
        Ok(NumericGenerator {
            system,
            fd_rel: T::lit(1e-3),
        })
    }

    pub fn system(&self) -> &SystemModel<T> {
        &self.system
    }

    fn shell_integral(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> Result<T> {
        let sys = &self.system;
        let l = lambda.length;
        let energy = sys.energy(z, lambda);
        let e_min = sys.minimum_energy(lambda)?;
        if energy - e_min <= T::default_epsilon() * T::lit(16.0) * (T::one() + energy.abs()) {
            return Ok(T::zero());
        }
        let (qm, qp) = sys.turning_points(energy, lambda)?;
        let mean = sys.microcanonical_average_line(|w| sys.potential_dlength(w.q, l), energy, lambda)?;
        let width = qp - qm;
        let two = T::lit(2.0);
        let m = sys.mass();
        let right_half = z.q >= qm + width * T::lit(0.5);
        let span = if right_half {
            (qp - z.q).max(T::zero())
        } else {
            (z.q - qm).max(T::zero())
        };
        if span == T::zero() {
            return Ok(T::zero());
        }
        let integrand = |phi: T| {
            let s = phi.sin();
            let d = span * s * s;
            let turn = if right_half { qp } else { qm };
            let gap = sys.gap_from_turning(energy, turn, d, width, right_half, l);
            let p = (two * m * gap).sqrt();
            if p == T::zero() {
                return T::zero();
            }
            let q = if right_half { qp - d } else { qm + d };
            (sys.potential_dlength(q, l) - mean) * span * (two * phi).sin() / p
        };
        let int = quadrature::integrate(integrand, T::zero(), T::frac_pi_2(), QuadOptions::rel(XI_QUAD_TOL))?;
        let sgn = if z.p > T::zero() {
            T::one()
        } else if z.p < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        Ok(if right_half { -sgn * m * int.value } else { sgn * m * int.value })
    }
}

impl<T: Real> Generator<T> for NumericGenerator<T> {
    fn value(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> Result<T> {
        self.shell_integral(z, lambda)
    }

    fn grad_z(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> Result<(T, T)> {
        let sys = &self.system;
        let energy = sys.energy(z, lambda);
        let e_min = sys.minimum_energy(lambda)?;
        let depth = (energy - e_min).max(T::default_epsilon());
        let p_scale = (T::lit(2.0) * sys.mass() * depth).sqrt();
        let q_scale = if energy > e_min {
            let (qm, qp) = sys.turning_points(energy, lambda)?;
            qp - qm
        } else {
            lambda.length
        };
        let hq = self.fd_rel * q_scale;
        let hp = self.fd_rel * p_scale;
        let d4 = |f: &dyn Fn(T) -> Result<T>, h: T| -> Result<T> {
            let (a, b, c, d) = (f(T::lit(2.0) * h)?, f(h)?, f(-h)?, f(-T::lit(2.0) * h)?);
            Ok((-a + T::lit(8.0) * b - T::lit(8.0) * c + d) / (T::lit(12.0) * h))
        };
        let dq = d4(&|h| self.shell_integral(&PhasePoint::new(z.q + h, z.p), lambda), hq)?;
        let dp = d4(&|h| self.shell_integral(&PhasePoint::new(z.q, z.p + h), lambda), hp)?;
        Ok((dq, dp))
    }

    fn provenance(&self) -> Provenance {
        Provenance::Numeric
    }

    fn describe(&self) -> String {
        format!("numeric({})", self.system.tag())
    }
}

/// `ξ` sampled uniformly in time along one orbit of a single shell.
#[derive(Debug, Clone)]
pub struct ShellGeneratorTable<T> {
    pub energy: T,
    pub param: ParamValue<T>,
    pub period: T,
    pub times: Vec<T>,
    pub points: Vec<PhasePoint<T>>,
    pub xi: Vec<T>,
    /// `⟨∂_L H₀⟩` subtracted during the construction.
    pub mean_grad: T,
    /// `|ξ(τ) − ξ(0)|` before the gauge shift.
    pub closure: T,
    /// `max |ξ|` over the samples.
    pub scale: T,
    spline: PeriodicSpline<T>,
}

impl<T: Real> ShellGeneratorTable<T> {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Periodic cubic interpolation of `ξ(t)`.
    pub fn value_at_time(&self, t: T) -> T {
        self.spline.value(t)
    }

    /// Uniform-time mean of the samples (exact for trigonometric content below Nyquist).
    pub fn time_average(&self) -> T {
        self.xi.iter().fold(T::zero(), |a, &x| a + x) / T::count(self.xi.len())
    }

    /// `dξ/dt` at the samples by fourth-order periodic central differences.
    pub fn orbit_derivative(&self) -> Vec<T> {
        let n = self.xi.len();
        let dt = self.period / T::count(n);
        (0..n)
            .map(|i| {
                let at = |k: isize| self.xi[((i as isize + k).rem_euclid(n as isize)) as usize];
                (-at(2) + T::lit(8.0) * at(1) - T::lit(8.0) * at(-1) + at(-2)) / (T::lit(12.0) * dt)
            })
            .collect()
    }

    /// CSV with columns `t,q,p,xi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,q,p,xi")?;
        for ((t, z), x) in self.times.iter().zip(&self.points).zip(&self.xi) {
            writeln!(w, "{t},{},{},{x}", z.q, z.p)?;
        }
        Ok(())
    }
}

/// Integrate `dξ/dt = ∂_L H₀ − ⟨∂_L H₀⟩` around the orbit started at the
/// right turning point, then subtract the time average of `ξ`.
pub fn build_xi_numeric<T: Real>(
    system: &SystemModel<T>,
    energy: T,
    lambda: &ParamValue<T>,
    n_samples: usize,
) -> Result<ShellGeneratorTable<T>> {
    if n_samples < 64 {
        return Err(Error::Precondition(format!("need at least 64 samples, got {n_samples}")));
    }
    if system.is_box() {
        return Err(Error::Precondition(
            "orbit construction needs a smooth potential; the box generator is qp/L".into(),
        ));
    }
    let setup = system.orbit_setup(energy, lambda)?;
    let mean_grad = system.mean_grad_lambda(energy, lambda)?;
    let l = lambda.length;
    let rhs = |_t: T, y: &[T; 4]| {
        let (dq, dp) = system.flow(y[0], y[1], l);
        [dq, dp, system.potential_dlength(y[0], l) - mean_grad, y[2]]
    };
    let start = [setup.q_plus, T::zero(), T::zero(), T::zero()];
    let t_max = setup.time_scale * T::lit(1000.0);
    let shot = |t0: T, y0: [T; 4], direction: i8| {
        ode::integrate_to_crossing(&rhs, t0, y0, |y| y[1], direction, t0 + t_max, setup.ctrl, setup.t_tol)?
            .crossed()
            .ok_or_else(|| Error::numerical("generator orbit", "period not found"))
    };
    let (t_half, y_half) = shot(T::zero(), start, 1)?;
    let (period, y_end) = shot(t_half, y_half, -1)?;
    let offset = y_end[3] / period;

    let mut times = Vec::with_capacity(n_samples);
    let mut points = Vec::with_capacity(n_samples);
    let mut xi = Vec::with_capacity(n_samples);
    let (mut t, mut y) = (T::zero(), start);
    let mut h = setup.ctrl.initial_step();
    for i in 0..n_samples {
        let target = period * T::count(i) / T::count(n_samples);
        if target > t {
            let (y1, h1) = ode::integrate(&rhs, t, y, target, setup.ctrl, h)?;
            y = y1;
            h = h1;
            t = target;
        }
        times.push(target);
        points.push(PhasePoint::new(y[0], y[1]));
        xi.push(y[2] - offset);
    }
    let scale = xi.iter().fold(T::zero(), |a, &x| a.max(x.abs())).max(T::default_epsilon());
    let closure = y_end[2].abs();
    if closure > T::tol(1e-6) * scale {
        return Err(Error::numerical(
            "generator orbit",
            format!("|ξ(τ) − ξ(0)| = {closure} exceeds 1e-6 of the scale {scale}; ⟨∂_L H₀⟩ is inconsistent"),
        ));
    }
    let spline = PeriodicSpline::new(period, xi.clone())?;
    Ok(ShellGeneratorTable {
        energy,
        param: *lambda,
        period,
        times,
        points,
        xi,
        mean_grad,
        closure,
        scale,
        spline,
    })
}

/// Diagnostics of a [`ShellGeneratorTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableCheck<T> {
    /// `|⟨ξ⟩| / scale`
    pub mean_residual: T,
    /// `|ξ(τ) − ξ(0)| / scale`
    pub closure_residual: T,
    /// `max |dξ/dt − (∂_L H₀ − ⟨∂_L H₀⟩)|` relative to the largest right-hand side.
    pub derivative_residual: T,
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::generators::xi_power_law;
    use crate::model::ScaledPolynomial;

    fn monomial(b: u32) -> SystemModel<f64> {
        SystemModel::generic(Arc::new(ScaledPolynomial::monomial(1.0, b).unwrap()), 1.0).unwrap()
    }

    #[test]
    fn table_matches_power_law_generators() {
        for b in [2, 4] {
            let sys = monomial(b);
            let lam = ParamValue::new(1.0);
            let table = build_xi_numeric(&sys, 1.0, &lam, 128).unwrap();
            let worst = table
                .points
                .iter()
                .zip(&table.xi)
                .map(|(z, &x)| (x - xi_power_law(z, 1.0, b)).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-6, "b = {b}: {worst}");
            assert!(table.closure < 1e-8 * table.scale, "closure {}", table.closure);
            assert!(table.time_average().abs() < 1e-8 * table.scale);
        }
    }

    #[test]
    fn table_rejects_few_samples_and_box() {
        assert!(build_xi_numeric(&monomial(2), 1.0, &ParamValue::new(1.0), 10).is_err());
        let b = SystemModel::hard_box(1.0).unwrap();
        assert!(build_xi_numeric(&b, 1.0, &ParamValue::new(1.0), 64).is_err());
    }

    #[test]
    fn pointwise_matches_dilation() {
        for b in [2u32, 4, 6] {
            let sys = monomial(b);
            let g = NumericGenerator::new(sys.clone()).unwrap();
            let lam = ParamValue::new(1.3);
            let pts = sys.shell_points(0.8, &lam, &[0.03, 0.2, 0.45, 0.6, 0.77, 0.98]).unwrap();
            let mu = b as f64 / (b as f64 + 2.0);
            for z in pts {
                let x = g.value(&z, &lam).unwrap();
                assert!((x - mu * z.q * z.p / 1.3).abs() < 1e-9, "b = {b}: {x}");
                let (dq, dp) = g.grad_z(&z, &lam).unwrap();
                assert!((dq - mu * z.p / 1.3).abs() < 1e-7, "dq {dq}");
                assert!((dp - mu * z.q / 1.3).abs() < 1e-7, "dp {dp}");
            }
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let table = build_xi_numeric(&monomial(2), 1.0, &ParamValue::new(1.0), 64).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,q,p,xi\n"));
        assert_eq!(text.lines().count(), 65);
    }
}
