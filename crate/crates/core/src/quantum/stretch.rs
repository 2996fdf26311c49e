//! Stretch maps generated by the dilation `ξ̂ = (q̂p̂ + p̂q̂)/2L`.
//!
//! With `X = (QD + DQ)/2` the real antisymmetric grid dilation, `δL ξ̂/(iℏ) =
//! −(δL/L) X`, and `exp(−ln(s) X)` maps `ψ(q)` to `s^{-1/2} ψ(q/s)` up to
//! grid error.

use nalgebra::DMatrix;

use super::operator::{c, re, xi_dilation_tridiagonal, GridSpec, Tridiagonal, C};
use crate::error::{Error, Result};
use crate::numerics::tridiag;
use crate::scalar::Real;

fn generator_over_i_hbar<T: Real>(grid: &GridSpec<T>, length: T, dl: T) -> Tridiagonal<T> {
    // ξ̂/(iℏ) with ℏ = 1; the map is independent of ℏ.
    let xi = xi_dilation_tridiagonal(length, T::one(), grid, T::one());
    let k = c(T::zero(), -dl);
    Tridiagonal {
        diag: xi.diag.iter().map(|z| *z * k).collect(),
        upper: xi.upper.iter().map(|z| *z * k).collect(),
    }
}

/// `(1 + δL ξ̂/iℏ) ψ`
pub fn stretch_first_order<T: Real>(grid: &GridSpec<T>, length: T, dl: T, psi: &[C<T>]) -> Vec<C<T>> {
    let a = generator_over_i_hbar(grid, length, dl);
    // `a` is anti-Hermitian, so apply it through its explicit lower band.
    apply_general(&a.diag, &a.upper, &a.upper.iter().map(|z| -z.conj()).collect::<Vec<_>>(), psi)
        .into_iter()
        .zip(psi)
        .map(|(x, y)| x + *y)
        .collect()
}

fn apply_general<T: Real>(diag: &[C<T>], upper: &[C<T>], lower: &[C<T>], v: &[C<T>]) -> Vec<C<T>> {
    let n = diag.len();
    (0..n)
        .map(|j| {
            let mut s = diag[j] * v[j];
            if j + 1 < n {
                s += upper[j] * v[j + 1];
            }
            if j > 0 {
                s += lower[j - 1] * v[j - 1];
            }
            s
        })
        .collect()
}

/// Cayley form `(1 − δL ξ̂/2iℏ)⁻¹ (1 + δL ξ̂/2iℏ) ψ`, unitary for real `δL`.
pub fn stretch_cayley<T: Real>(grid: &GridSpec<T>, length: T, dl: T, psi: &[C<T>]) -> Result<Vec<C<T>>> {
    let a = generator_over_i_hbar(grid, length, dl * T::lit(0.5));
    let lower: Vec<C<T>> = a.upper.iter().map(|z| -z.conj()).collect();
    let one = re(T::one());
    let rhs: Vec<C<T>> = apply_general(&a.diag, &a.upper, &lower, psi)
        .into_iter()
        .zip(psi)
        .map(|(x, y)| x + *y)
        .collect();
    let d: Vec<C<T>> = a.diag.iter().map(|z| one - *z).collect();
    let u: Vec<C<T>> = a.upper.iter().map(|z| -*z).collect();
    let l: Vec<C<T>> = lower.iter().map(|z| -*z).collect();
    tridiag::solve_complex(&l, &d, &u, &rhs)
}

/// Stepwise transport `dψ/dL = ξ̂(L) ψ / iℏ` from `l0` to `l1` with `steps`
/// midpoint Cayley steps; the exact result is the stretch by `l1/l0`.
pub fn transport_stretch<T: Real>(grid: &GridSpec<T>, l0: T, l1: T, psi: &[C<T>], steps: usize) -> Result<Vec<C<T>>> {
    if steps == 0 {
        return Err(Error::Precondition("transport needs at least one step".into()));
    }
    let dl = (l1 - l0) / T::count(steps);
    let mut v = psi.to_vec();
    for k in 0..steps {
        let mid = l0 + dl * (T::count(k) + T::lit(0.5));
        v = stretch_cayley(grid, mid, dl, &v)?;
    }
    Ok(v)
}

/// `exp(−ln(s) X) ψ` through the dense matrix exponential (scaling and squaring).
pub fn stretch_exp<T: Real>(grid: &GridSpec<T>, s: T, psi: &[C<T>]) -> Result<Vec<C<T>>> {
    if !(s > T::zero()) {
        return Err(Error::Precondition(format!("stretch factor must be positive, got {s}")));
    }
    let n = grid.n_points;
    let two_h = T::lit(2.0) * grid.spacing;
    let k = -s.ln() * T::lit(0.5);
    let mut a = DMatrix::from_element(n, n, T::zero());
    for j in 0..n - 1 {
        let x = (grid.position(j) + grid.position(j + 1)) / two_h;
        a[(j, j + 1)] = k * x;
        a[(j + 1, j)] = -k * x;
    }
    let e = a.exp();
    let re_part = nalgebra::DVector::from_iterator(n, psi.iter().map(|z| z.re));
    let im_part = nalgebra::DVector::from_iterator(n, psi.iter().map(|z| z.im));
    let (r, i) = (&e * re_part, &e * im_part);
    Ok(r.iter().zip(i.iter()).map(|(x, y)| c(*x, *y)).collect())
}
