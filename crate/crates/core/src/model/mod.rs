//! Parametrized one-dimensional Hamiltonians `H₀(q, p; L) = p²/2m + V(q; L)`,
//! driving schedules and the phase-space geometry of their energy shells.

mod potential;
mod schedule;
mod shell;

use std::fmt;
use std::sync::Arc;

pub use potential::{Potential, ScaledPolynomial};
pub use schedule::{Schedule, ScheduleKind};
pub use shell::{EnergyShell, OrbitAverage};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A point `z = (q, p)` in two-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint<T> {
    pub q: T,
    pub p: T,
}

impl<T: Real> PhasePoint<T> {
    pub fn new(q: T, p: T) -> Self {
        PhasePoint { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }
}

/// External parameter value. Every built-in system is driven through a single
/// length scale `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamValue<T> {
    pub length: T,
}

impl<T: Real> ParamValue<T> {
    pub fn new(length: T) -> Self {
        ParamValue { length }
    }

    pub fn components(&self) -> [T; 1] {
        [self.length]
    }

    fn check_positive(&self) -> Result<()> {
        if self.length > T::zero() && self.length.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("length must be positive, got {}", self.length)))
        }
    }
}

/// The family a [`SystemModel`] belongs to.
#[derive(Clone)]
pub enum SystemKind<T> {
    /// Free particle between hard walls at `q = 0` and `q = L`.
    Box,
    /// `V = ε (q/L)^b` with `b` a positive even integer and `ε > 0`.
    PowerLaw { exponent: u32, epsilon: T },
    /// Any confining potential with a single minimum.
    Generic(Arc<dyn Potential<T>>),
}

impl<T: Real> fmt::Debug for SystemKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemKind::Box => write!(f, "Box"),
            SystemKind::PowerLaw { exponent, epsilon } => {
                write!(f, "PowerLaw {{ exponent: {exponent}, epsilon: {epsilon} }}")
            }
            SystemKind::Generic(v) => write!(f, "Generic({})", v.describe()),
        }
    }
}

/// `H₀(q, p; L) = p²/2m + V(q; L)`.
#[derive(Clone)]
pub struct SystemModel<T> {
    kind: SystemKind<T>,
    mass: T,
}

impl<T: Real> fmt::Debug for SystemModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("kind", &self.kind)
            .field("mass", &self.mass)
            .finish()
    }
}

impl<T: Real> SystemModel<T> {
    pub fn hard_box(mass: T) -> Result<Self> {
        Self::new(SystemKind::Box, mass)
    }

    pub fn power_law(exponent: u32, epsilon: T, mass: T) -> Result<Self> {
        Self::new(SystemKind::PowerLaw { exponent, epsilon }, mass)
    }

    pub fn generic(potential: Arc<dyn Potential<T>>, mass: T) -> Result<Self> {
        Self::new(SystemKind::Generic(potential), mass)
    }

    pub fn new(kind: SystemKind<T>, mass: T) -> Result<Self> {
        if !(mass > T::zero() && mass.is_finite()) {
            return Err(Error::Precondition(format!("mass must be positive, got {mass}")));
        }
        if let SystemKind::PowerLaw { exponent, epsilon } = &kind {
            if *exponent == 0 || exponent % 2 != 0 {
                return Err(Error::Precondition(format!(
                    "power-law exponent must be a positive even integer, got {exponent}"
                )));
            }
            if !(*epsilon > T::zero() && epsilon.is_finite()) {
                return Err(Error::Precondition(format!("power-law strength must be positive, got {epsilon}")));
            }
        }
        if let SystemKind::Generic(v) = &kind {
            v.minimum(T::one())?;
        }
        Ok(SystemModel { kind, mass })
    }

    pub fn kind(&self) -> &SystemKind<T> {
        &self.kind
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn is_box(&self) -> bool {
        matches!(self.kind, SystemKind::Box)
    }

    /// Coefficient `μ` of the analytic generator `ξ = μ q p / L`, when one exists:
    /// `1` for the box and `b/(b+2)` for power laws.
    pub fn dilation_coefficient(&self) -> Option<T> {
        match &self.kind {
            SystemKind::Box => Some(T::one()),
            SystemKind::PowerLaw { exponent, .. } => {
                let b = T::count(*exponent as usize);
                Some(b / (b + T::lit(2.0)))
            }
            SystemKind::Generic(_) => None,
        }
    }

    /// `V(q; L)`. The box potential is zero; its walls enter only through
    /// [`SystemModel::contains`] and collision handling.
    pub fn potential(&self, q: T, length: T) -> T {
        match &self.kind {
            SystemKind::Box => T::zero(),
            SystemKind::PowerLaw { exponent, epsilon } => *epsilon * (q / length).powi(*exponent as i32),
            SystemKind::Generic(v) => v.value(q, length),
        }
    }

    /// `∂V/∂q`
    pub fn potential_dq(&self, q: T, length: T) -> T {
        match &self.kind {
            SystemKind::Box => T::zero(),
            SystemKind::PowerLaw { exponent, epsilon } => {
                let b = *exponent as i32;
                *epsilon * T::count(*exponent as usize) * (q / length).powi(b - 1) / length
            }
            SystemKind::Generic(v) => v.dq(q, length),
        }
    }

    /// `∂V/∂L`
    pub fn potential_dlength(&self, q: T, length: T) -> T {
        match &self.kind {
            SystemKind::Box => T::zero(),
            SystemKind::PowerLaw { exponent, epsilon } => {
                -*epsilon * T::count(*exponent as usize) * (q / length).powi(*exponent as i32) / length
            }
            SystemKind::Generic(v) => v.dlength(q, length),
        }
    }

    /// Location of the potential minimum (the box floor is flat; `L/2` is returned).
    pub fn potential_minimum(&self, lambda: &ParamValue<T>) -> Result<T> {
        lambda.check_positive()?;
        match &self.kind {
            SystemKind::Box => Ok(lambda.length * T::lit(0.5)),
            SystemKind::PowerLaw { .. } => Ok(T::zero()),
            SystemKind::Generic(v) => v.minimum(lambda.length),
        }
    }

    pub fn minimum_energy(&self, lambda: &ParamValue<T>) -> Result<T> {
        let q = self.potential_minimum(lambda)?;
        Ok(self.potential(q, lambda.length))
    }

    /// Whether `z` lies in the configuration space at `λ` (inside the walls for the box).
    pub fn contains(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> bool {
        z.is_finite()
            && match self.kind {
                SystemKind::Box => z.q >= T::zero() && z.q <= lambda.length,
                _ => true,
            }
    }

    pub fn energy(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> T {
        z.p * z.p / (T::lit(2.0) * self.mass) + self.potential(z.q, lambda.length)
    }

    /// `(∂H₀/∂q, ∂H₀/∂p)`
    pub fn grad_z(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> (T, T) {
        (self.potential_dq(z.q, lambda.length), z.p / self.mass)
    }

    /// `∂H₀/∂L`. For the box this is the regular part only (zero inside the
    /// walls); the wall impulse is accounted for in [`SystemModel::mean_grad_lambda`].
    pub fn grad_lambda(&self, z: &PhasePoint<T>, lambda: &ParamValue<T>) -> T {
        self.potential_dlength(z.q, lambda.length)
    }

    /// Short label for reports.
    pub fn tag(&self) -> String {
        match &self.kind {
            SystemKind::Box => "box".to_string(),
            SystemKind::PowerLaw { exponent, epsilon } => format!("power_law(b={exponent}, eps={epsilon})"),
            SystemKind::Generic(v) => format!("generic_1d({})", v.describe()),
        }
    }
}
