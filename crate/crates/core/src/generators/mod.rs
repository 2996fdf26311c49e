//! Classical counter-diabatic generators `ξ(z; λ)`.
//!
//! A generator satisfies `{ξ, H₀} = ∂_L H₀ − ⟨∂_L H₀⟩` with `⟨ξ⟩ = 0` on every
//! shell. The box and the power laws have the closed form `ξ = μ q p / L`; any
//! other confining potential is handled by quadrature along the shell.

mod numeric;
mod verify;

pub use numeric::{build_xi_numeric, NumericGenerator, ShellGeneratorTable, TableCheck};
pub use verify::{parametric_map_check, verify_generator, verify_table, GeneratorReport, MapReport, ShellResidual};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ParamValue, PhasePoint, SystemModel};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Numeric,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Analytic => "analytic",
            Provenance::Numeric => "numeric",
        })
    }
}

/// `ξ(z; λ)` together with its phase-space gradient.
pub trait Generator<T: Real>: Send + Sync {
    fn value(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> Result<T>;
    /// `(∂ξ/∂q, ∂ξ/∂p)`
    fn grad_z(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> Result<(T, T)>;
    fn provenance(&self) -> Provenance;
    fn describe(&self) -> String;
}

/// `ξ = μ q p / L`: `μ = 1` for the box, `μ = b/(b+2)` for `V ∝ (q/L)^b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dilation<T> {
    pub coefficient: T,
}

impl<T: Real> Dilation<T> {
    pub fn new(coefficient: T) -> Self {
        Dilation { coefficient }
    }

    pub fn for_box() -> Self {
        Dilation::new(T::one())
    }

    pub fn for_power_law(exponent: u32) -> Self {
        let b = T::count(exponent as usize);
        Dilation::new(b / (b + T::lit(2.0)))
    }
}

impl<T: Real> Generator<T> for Dilation<T> {
    fn value(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> Result<T> {
        Ok(self.coefficient * z.q * z.p / lambda.length)
    }

    fn grad_z(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> Result<(T, T)> {
        let k = self.coefficient / lambda.length;
        Ok((k * z.p, k * z.q))
    }

    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }

    fn describe(&self) -> String {
        format!("dilation(mu={})", self.coefficient)
    }
}

/// `ξ = q p / L`
pub fn xi_box<T: Real>(z: &PhasePoint<T>, length: T) -> T {
    z.q * z.p / length
}

/// `ξ = (b/(b+2)) q p / L`
pub fn xi_power_law<T: Real>(z: &PhasePoint<T>, length: T, exponent: u32) -> T {
    let b = T::count(exponent as usize);
    b / (b + T::lit(2.0)) * z.q * z.p / length
}

/// The closed-form generator of `system` if it has one, else the numeric one.
pub fn generator_for<T: Real>(system: &SystemModel<T>) -> Result<Arc<dyn Generator<T>>> {
    match system.dilation_coefficient() {
        Some(mu) => Ok(Arc::new(Dilation::new(mu))),
        None => Ok(Arc::new(NumericGenerator::new(system.clone())?)),
    }
}

/// Analytic generator only; errors for generic potentials.
pub fn analytic_generator<T: Real>(system: &SystemModel<T>) -> Result<Dilation<T>> {
    system
        .dilation_coefficient()
        .map(Dilation::new)
        .ok_or_else(|| Error::Precondition(format!("{} has no closed-form generator", system.tag())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_examples() {
        let z = PhasePoint::new(0.5_f64, 2.0);
        assert_eq!(xi_box(&z, 1.0), 1.0);
        assert_eq!(xi_box(&PhasePoint::new(0.7, 0.0), 3.0), 0.0);
        let one = PhasePoint::new(1.0_f64, 1.0);
        assert_eq!(xi_power_law(&one, 1.0, 2), 0.5);
        assert!((xi_power_law(&one, 1.0, 4) - 2.0 / 3.0).abs() < 1e-15);
        let big = xi_power_law(&one, 1.0, 1000);
        assert!((big - xi_box(&one, 1.0)).abs() < 2.1e-3);
    }

    #[test]
    fn box_bracket_identity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Dilation::for_box();
        for _ in 0..1000 {
            let l: f64 = rng.random_range(0.2..5.0);
            let q = rng.random_range(0.0..l);
            let mut p: f64 = rng.random_range(-10.0..10.0);
            if p == 0.0 {
                p = 1.0;
            }
            let z = PhasePoint::new(q, p);
            let (xq, xp) = g.grad_z(&z, &ParamValue::new(l)).unwrap();
            // ω = 2|p|L: ∂ω/∂q = 0, ∂ω/∂p = 2L sgn p, ∂ω/∂L = 2|p|.
            let bracket = xq * 2.0 * l * p.signum() - xp * 0.0;
            assert!((bracket - 2.0 * p.abs()).abs() < 1e-10 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn analytic_lookup() {
        let s = SystemModel::<f64>::power_law(4, 1.0, 1.0).unwrap();
        assert!((analytic_generator(&s).unwrap().coefficient - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(generator_for(&s).unwrap().provenance(), Provenance::Analytic);
    }
}
