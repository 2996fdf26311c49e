use std::cell::RefCell;

use super::{Generator, ShellGeneratorTable, TableCheck};
use crate::error::{Error, Result};
use crate::model::{ParamValue, PhasePoint, SystemModel};
use crate::scalar::Real;

/// Residuals of the generator conditions on one shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellResidual<T> {
    pub energy: T,
    /// `max |{ξ, ω} − ∂_L ω| / max |∂_L ω|` over the sampled points.
    pub bracket_residual: T,
    /// `|⟨ξ⟩| / max |ξ|`
    pub average_residual: T,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorReport<T> {
    pub generator: String,
    pub shells: Vec<ShellResidual<T>>,
}

impl<T: Real> GeneratorReport<T> {
    pub fn max_bracket(&self) -> T {
        self.shells.iter().fold(T::zero(), |a, s| a.max(s.bracket_residual))
    }

    pub fn max_average(&self) -> T {
        self.shells.iter().fold(T::zero(), |a, s| a.max(s.average_residual))
    }
}

fn time_uniform_fractions<T: Real>(n: usize) -> Vec<T> {
    (0..n).map(|k| (T::count(k) + T::lit(0.5)) / T::count(n)).collect()
}

/// Check `{ξ, ω} = ∂_L ω` at `n_points ≥ 100` time-uniform points per shell and
/// `⟨ξ⟩ = 0` by orbit averaging.
pub fn verify_generator<T: Real>(
    system: &SystemModel<T>,
    generator: &dyn Generator<T>,
    lambda: &ParamValue<T>,
    energies: &[T],
    n_points: usize,
) -> Result<GeneratorReport<T>> {
    let n = n_points.max(100);
    let mut shells = Vec::with_capacity(energies.len());
    for &energy in energies {
        let pts = system.shell_points(energy, lambda, &time_uniform_fractions(n))?;
        let w_e = system.dvolume_denergy(energy, lambda)?;
        let w_l = system.dvolume_dlength(energy, lambda)?;
        let mut worst = T::zero();
        let mut scale = T::zero();
        let mut xi_scale = T::zero();
        for z in &pts {
            let (hq, hp) = system.grad_z(z, lambda);
            let (wq, wp) = (w_e * hq, w_e * hp);
            let target = w_l + w_e * system.grad_lambda(z, lambda);
            let (xq, xp) = generator.grad_z(z, lambda)?;
            let bracket = xq * wp - xp * wq;
            worst = worst.max((bracket - target).abs());
            scale = scale.max(target.abs());
            xi_scale = xi_scale.max(generator.value(z, lambda)?.abs());
        }
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let mean = system.microcanonical_average(
            |z: PhasePoint<T>| match generator.value(&z, lambda) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    T::zero()
                }
            },
            energy,
            lambda,
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let tiny = T::default_epsilon();
        shells.push(ShellResidual {
            energy,
            bracket_residual: worst / scale.max(tiny),
            average_residual: mean.abs() / xi_scale.max(tiny),
            points: n,
        });
    }
    Ok(GeneratorReport {
        generator: generator.describe(),
        shells,
    })
}

/// Outcome of mapping shell points by `z → z + δλ {z, ξ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapReport<T> {
    pub delta: T,
    /// `max |ω(z + δz; λ + δλ) − ω(z; λ)| / ω` at `δλ`.
    pub residual: T,
    /// The same at `δλ/2`.
    pub residual_half: T,
    /// `residual / residual_half`; about 4 for a second-order remainder.
    pub ratio: Option<T>,
    pub mapped: Vec<PhasePoint<T>>,
}

impl<T: Real> MapReport<T> {
    /// Ratio within 20% of 4.
    pub fn is_second_order(&self) -> bool {
        self.ratio
            .map(|r| (r - T::lit(4.0)).abs() <= T::lit(0.8))
            .unwrap_or(false)
    }
}

fn map_residual<T: Real>(
    system: &SystemModel<T>,
    generator: &dyn Generator<T>,
    lambda: &ParamValue<T>,
    pts: &[PhasePoint<T>],
    omega: T,
    delta: T,
) -> Result<(T, Vec<PhasePoint<T>>)> {
    let shifted = ParamValue::new(lambda.length + delta);
    let mut worst = T::zero();
    let mut mapped = Vec::with_capacity(pts.len());
    for z in pts {
        let (xq, xp) = generator.grad_z(z, lambda)?;
        // {q, ξ} = ∂ξ/∂p, {p, ξ} = −∂ξ/∂q
        let w = PhasePoint::new(z.q + delta * xp, z.p - delta * xq);
        let omega_new = system.adiabatic_invariant(&w, &shifted)?;
        worst = worst.max((omega_new - omega).abs() / omega);
        mapped.push(w);
    }
    Ok((worst, mapped))
}

/// Apply the parametric map to `n_points ≥ 100` shell points at `δλ` and `δλ/2`.
pub fn parametric_map_check<T: Real>(
    system: &SystemModel<T>,
    generator: &dyn Generator<T>,
    energy: T,
    lambda: &ParamValue<T>,
    delta: T,
    n_points: usize,
) -> Result<MapReport<T>> {
    if delta.abs() > T::lit(1e-3) * lambda.length {
        return Err(Error::Precondition(format!(
            "parameter step {delta} exceeds 1e-3 of L = {}",
            lambda.length
        )));
    }
    let pts = system.shell_points(energy, lambda, &time_uniform_fractions(n_points.max(100)))?;
    let omega = system.phase_volume(energy, lambda)?;
    let (residual, mapped) = map_residual(system, generator, lambda, &pts, omega, delta)?;
    let (residual_half, _) = map_residual(system, generator, lambda, &pts, omega, delta * T::lit(0.5))?;
    let ratio = if residual_half > T::zero() {
        Some(residual / residual_half)
    } else {
        None
    };
    Ok(MapReport {
        delta,
        residual,
        residual_half,
        ratio,
        mapped,
    })
}

/// Gauge, closure and along-orbit derivative checks of a numeric table.
pub fn verify_table<T: Real>(system: &SystemModel<T>, table: &ShellGeneratorTable<T>) -> TableCheck<T> {
    let l = table.param.length;
    let rates = table.orbit_derivative();
    let mut worst = T::zero();
    let mut scale = T::zero();
    for (z, r) in table.points.iter().zip(&rates) {
        let g = system.potential_dlength(z.q, l) - table.mean_grad;
        worst = worst.max((*r - g).abs());
        scale = scale.max(g.abs());
    }
    let tiny = T::default_epsilon();
    TableCheck {
        mean_residual: table.time_average().abs() / table.scale,
        closure_residual: table.closure / table.scale,
        derivative_residual: worst / scale.max(tiny),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::generators::{build_xi_numeric, Dilation, NumericGenerator, Provenance};
    use crate::model::ScaledPolynomial;

    /// `ξ + f(H₀)` with `f(E) = 0.3 E²`.
    struct PlusEnergy {
        base: Dilation<f64>,
        system: SystemModel<f64>,
    }

    impl Generator<f64> for PlusEnergy {
        fn value(&self, z: &PhasePoint<f64>, l: &ParamValue<f64>) -> Result<f64> {
            let e = self.system.energy(z, l);
            Ok(self.base.value(z, l)? + 0.3 * e * e)
        }
        fn grad_z(&self, z: &PhasePoint<f64>, l: &ParamValue<f64>) -> Result<(f64, f64)> {
            let e = self.system.energy(z, l);
            let (hq, hp) = self.system.grad_z(z, l);
            let (a, b) = self.base.grad_z(z, l)?;
            Ok((a + 0.6 * e * hq, b + 0.6 * e * hp))
        }
        fn provenance(&self) -> Provenance {
            Provenance::Analytic
        }
        fn describe(&self) -> String {
            "dilation + 0.3 H0^2".into()
        }
    }

    #[test]
    fn box_generator_passes() {
        let sys = SystemModel::<f64>::hard_box(1.0).unwrap();
        let r = verify_generator(&sys, &Dilation::for_box(), &ParamValue::new(1.0), &[0.5, 2.0, 9.0], 100).unwrap();
        assert!(r.max_bracket() < 1e-8, "{}", r.max_bracket());
        assert!(r.max_average() < 1e-8, "{}", r.max_average());
        let one = verify_generator(&sys, &Dilation::for_box(), &ParamValue::new(1.0), &[2.0], 100).unwrap();
        assert_eq!(one.shells[0].points, 100);
    }

    #[test]
    fn power_law_generators_pass_and_corruption_is_caught() {
        for b in [2u32, 4, 6] {
            let sys = SystemModel::power_law(b, 1.0, 1.0).unwrap();
            let lam = ParamValue::new(1.4);
            let r = verify_generator(&sys, &Dilation::for_power_law(b), &lam, &[0.3, 1.0, 4.0], 100).unwrap();
            assert!(r.max_bracket() < 1e-8, "b = {b}: {}", r.max_bracket());
            assert!(r.max_average() < 1e-8, "b = {b}: {}", r.max_average());
        }
        let sys = SystemModel::power_law(2, 1.0, 1.0).unwrap();
        let bad = verify_generator(&sys, &Dilation::new(0.4), &ParamValue::new(1.0), &[1.0], 100).unwrap();
        assert!(bad.max_bracket() > 1e-2);
    }

    #[test]
    fn energy_function_changes_only_the_average() {
        let sys = SystemModel::power_law(4, 1.0, 1.0).unwrap();
        let lam = ParamValue::new(1.0);
        let base = verify_generator(&sys, &Dilation::for_power_law(4), &lam, &[1.0], 100).unwrap();
        let plus = PlusEnergy {
            base: Dilation::for_power_law(4),
            system: sys.clone(),
        };
        let shifted = verify_generator(&sys, &plus, &lam, &[1.0], 100).unwrap();
        assert!((shifted.max_bracket() - base.max_bracket()).abs() < 1e-10);
        assert!(shifted.max_average() > 1e-2);
    }

    #[test]
    fn numeric_generator_satisfies_conditions() {
        let v = ScaledPolynomial::new(vec![(1.0, 4), (0.5, 3), (0.8, 2)]).unwrap();
        let sys = SystemModel::generic(Arc::new(v), 1.0).unwrap();
        let g = NumericGenerator::new(sys.clone()).unwrap();
        let r = verify_generator(&sys, &g, &ParamValue::new(1.0), &[0.5, 1.5], 100).unwrap();
        assert!(r.max_bracket() < 1e-5, "{}", r.max_bracket());
        assert!(r.max_average() < 1e-8, "{}", r.max_average());
    }

    #[test]
    fn box_map_is_second_order_and_stretches_shell() {
        let sys = SystemModel::<f64>::hard_box(1.0).unwrap();
        let lam = ParamValue::new(1.0);
        let r = parametric_map_check(&sys, &Dilation::for_box(), 2.0, &lam, 1e-3, 100).unwrap();
        assert!(r.residual < 5e-6, "{}", r.residual);
        assert!(r.is_second_order(), "{:?}", r.ratio);
        let nu = 1e-3_f64;
        for z in &r.mapped {
            assert!((z.p.abs() - 2.0 * (1.0 - nu)).abs() < 1e-12);
            assert!(z.q >= 0.0 && z.q <= 1.0 + nu + 1e-15);
        }
        let zero = parametric_map_check(&sys, &Dilation::for_box(), 2.0, &lam, 0.0, 100).unwrap();
        assert_eq!(zero.residual, 0.0);
        assert!(parametric_map_check(&sys, &Dilation::for_box(), 2.0, &lam, 0.1, 100).is_err());
    }

    #[test]
    fn table_diagnostics() {
        let sys = SystemModel::generic(Arc::new(ScaledPolynomial::monomial(1.0, 4).unwrap()), 1.0).unwrap();
        let t = build_xi_numeric(&sys, 1.0, &ParamValue::new(1.0), 256).unwrap();
        let c = verify_table(&sys, &t);
        assert!(c.mean_residual < 1e-8);
        assert!(c.closure_residual < 1e-8);
        assert!(c.derivative_residual < 1e-4, "{}", c.derivative_residual);
    }
}
