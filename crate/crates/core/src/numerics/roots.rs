//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Find a root of `f` in `[a, b]`; `f(a)` and `f(b)` must differ in sign.
pub fn brent<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, xtol: T) -> Result<T> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return Err(Error::Domain(format!(
            "root not bracketed: f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    let two = T::lit(2.0);
    let eps = T::default_epsilon();
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = two * eps * b.abs() + xtol * T::lit(0.5);
        let xm = (c - b) / two;
        if xm.abs() <= tol1 || fb == T::zero() {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * xm * s;
                q = T::one() - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (two * xm * qq * (qq - r) - (b - a) * (r - T::one()));
                q = (qq - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            }
            p = p.abs();
            let min1 = T::lit(3.0) * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if two * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += if xm > T::zero() { tol1 } else { -tol1 };
        }
        fb = f(b);
    }
    Err(Error::numerical("brent", "maximum iterations exceeded"))
}

/// Expand `hi` geometrically away from `lo` until `f` changes sign, then solve.
pub fn expand_and_solve<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, mut hi: T, xtol: T) -> Result<T> {
    let flo = f(lo);
    let mut tries = 0;
    while (f(hi) > T::zero()) == (flo > T::zero()) {
        hi = lo + (hi - lo) * T::lit(2.0);
        tries += 1;
        if tries > 200 || !hi.is_finite() {
            return Err(Error::Domain("could not bracket root".into()));
        }
    }
    brent(f, lo, hi, xtol)
}
