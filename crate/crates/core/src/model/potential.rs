use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::numerics::roots::brent;
use crate::scalar::Real;

/// A confining one-dimensional potential `V(q; L)` with analytic derivatives.
pub trait Potential<T: Real>: Debug + Send + Sync {
    fn value(&self, q: T, length: T) -> T;
    /// `∂V/∂q`
    fn dq(&self, q: T, length: T) -> T;
    /// `∂V/∂L`
    fn dlength(&self, q: T, length: T) -> T;

    /// Location of the (unique) minimum at parameter `length`.
    fn minimum(&self, length: T) -> Result<T> {
        locate_single_minimum(|q| self.value(q, length), |q| self.dq(q, length), length)
    }

    fn describe(&self) -> String {
        format!("{self:?}")
    }
}

/// Sample `v` on an expanding window around the origin, reject more than one
/// local minimum, and polish the minimum by solving `v'(q) = 0`.
pub(crate) fn locate_single_minimum<T, V, D>(v: V, dv: D, length: T) -> Result<T>
where
    T: Real,
    V: Fn(T) -> T,
    D: Fn(T) -> T,
{
    let scale = length.abs().max(T::default_epsilon());
    let mut radius = scale;
    let samples = 2048usize;
    for _ in 0..60 {
        let step = T::lit(2.0) * radius / T::count(samples);
        let qs: Vec<T> = (0..=samples).map(|i| -radius + step * T::count(i)).collect();
        let vs: Vec<T> = qs.iter().map(|&q| v(q)).collect();
        let (imin, _) = vs
            .iter()
            .enumerate()
            .fold((0usize, vs[0]), |(bi, bv), (i, &x)| if x < bv { (i, x) } else { (bi, bv) });
        if imin == 0 || imin == samples {
            radius *= T::lit(2.0);
            continue;
        }
        let local_minima = (1..samples)
            .filter(|&i| vs[i] < vs[i - 1] && vs[i] <= vs[i + 1])
            .count();
        if local_minima > 1 {
            return Err(Error::Domain(format!(
                "potential has {local_minima} local minima; energy shells are not simple closed loops"
            )));
        }
        let (a, b) = (qs[imin - 1], qs[imin + 1]);
        let (da, db) = (dv(a), dv(b));
        if da < T::zero() && db > T::zero() {
            return brent(&dv, a, b, T::default_epsilon() * scale);
        }
        return Ok(qs[imin]);
    }
    Err(Error::Domain("potential is not confining: no minimum found".into()))
}

/// `V(q; L) = Σ_k c_k (q/L)^k`. Confining when the leading power is even with a
/// positive coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPolynomial<T> {
    terms: Vec<(T, u32)>,
    /// Minimum location in the scaled coordinate `x = q/L`.
    x_min: T,
}

impl<T: Real> ScaledPolynomial<T> {
    pub fn new(terms: Vec<(T, u32)>) -> Result<Self> {
        let terms: Vec<(T, u32)> = terms.into_iter().filter(|(c, _)| *c != T::zero()).collect();
        let (lead_c, lead_k) = terms
            .iter()
            .copied()
            .max_by_key(|&(_, k)| k)
            .ok_or_else(|| Error::Precondition("polynomial potential has no terms".into()))?;
        if lead_k == 0 || lead_k % 2 != 0 || lead_c <= T::zero() {
            return Err(Error::Precondition(format!(
                "potential is not confining: leading term {lead_c}·x^{lead_k} must be an even power with positive coefficient"
            )));
        }
        let mut poly = ScaledPolynomial {
            terms,
            x_min: T::zero(),
        };
        poly.x_min = locate_single_minimum(|x| poly.eval(x), |x| poly.deriv(x), T::one())?;
        Ok(poly)
    }

    /// `ε (q/L)^b`
    pub fn monomial(coefficient: T, power: u32) -> Result<Self> {
        Self::new(vec![(coefficient, power)])
    }

    pub fn terms(&self) -> &[(T, u32)] {
        &self.terms
    }

    fn eval(&self, x: T) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, &(c, k)| acc + c * x.powi(k as i32))
    }

    fn deriv(&self, x: T) -> T {
        self.terms.iter().fold(T::zero(), |acc, &(c, k)| {
            if k == 0 {
                acc
            } else {
                acc + c * T::count(k as usize) * x.powi(k as i32 - 1)
            }
        })
    }
}

impl<T: Real> Potential<T> for ScaledPolynomial<T> {
    fn value(&self, q: T, length: T) -> T {
        self.eval(q / length)
    }

    fn dq(&self, q: T, length: T) -> T {
        self.deriv(q / length) / length
    }

    fn dlength(&self, q: T, length: T) -> T {
        let x = q / length;
        -self.deriv(x) * x / length
    }

    fn minimum(&self, length: T) -> Result<T> {
        Ok(self.x_min * length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let v = ScaledPolynomial::<f64>::new(vec![(1.0, 4), (-0.3, 3), (0.5, 2), (0.2, 1)]).unwrap();
        let (q, l) = (0.7, 1.3);
        let h = 1e-6;
        let fd_q = (v.value(q + h, l) - v.value(q - h, l)) / (2.0 * h);
        let fd_l = (v.value(q, l + h) - v.value(q, l - h)) / (2.0 * h);
        assert!((fd_q - v.dq(q, l)).abs() < 1e-8);
        assert!((fd_l - v.dlength(q, l)).abs() < 1e-8);
    }

    #[test]
    fn rejects_odd_leading_power() {
        assert!(ScaledPolynomial::<f64>::new(vec![(1.0, 3)]).is_err());
        assert!(ScaledPolynomial::<f64>::new(vec![(-1.0, 4)]).is_err());
    }

    #[test]
    fn rejects_double_well() {
        let err = ScaledPolynomial::<f64>::new(vec![(1.0, 4), (-2.0, 2)]).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn minimum_of_shifted_quadratic() {
        // (x - 0.5)^2 = x^2 - x + 0.25
        let v = ScaledPolynomial::<f64>::new(vec![(1.0, 2), (-1.0, 1), (0.25, 0)]).unwrap();
        assert!((v.minimum(2.0).unwrap() - 1.0).abs() < 1e-12);
    }
}
