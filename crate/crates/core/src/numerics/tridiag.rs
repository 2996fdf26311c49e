//! Tridiagonal linear algebra: complex solves for the Cayley propagator and a
//! Sturm-bisection / inverse-iteration eigensolver for the lowest levels of a
//! real symmetric tridiagonal matrix.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solve `A x = r` for tridiagonal `A` with sub-diagonal `lower`, diagonal
/// `diag` and super-diagonal `upper` (Thomas algorithm, no pivoting).
pub fn solve_complex<T: Real>(
    lower: &[Complex<T>],
    diag: &[Complex<T>],
    upper: &[Complex<T>],
    rhs: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    let n = diag.len();
    let mut c = vec![Complex::new(T::zero(), T::zero()); n];
    let mut d = vec![Complex::new(T::zero(), T::zero()); n];
    let tiny = T::default_epsilon() * T::default_epsilon();
    let pivot_ok = |z: &Complex<T>| z.norm_sqr() > tiny;
    if !pivot_ok(&diag[0]) {
        return Err(Error::numerical("tridiagonal solve", "zero pivot"));
    }
    c[0] = if n > 1 { upper[0] / diag[0] } else { c[0] };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i - 1] * c[i - 1];
        if !pivot_ok(&denom) {
            return Err(Error::numerical("tridiagonal solve", format!("zero pivot at row {i}")));
        }
        if i < n - 1 {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// Number of eigenvalues of the symmetric tridiagonal `(d, e)` strictly below `x`.
fn sturm_count<T: Real>(d: &[T], e: &[T], x: T, pivmin: T) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < T::zero() {
        count += 1;
    }
    for i in 1..d.len() {
        let prev = if q.abs() < pivmin { pivmin } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / prev;
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// Solve `(A - σ I) x = b` with partial pivoting for symmetric tridiagonal `A`.
fn shifted_solve<T: Real>(d: &[T], e: &[T], sigma: T, b: &[T], pivmin: T) -> Vec<T> {
    let n = d.len();
    // Row i holds (sub, diag, sup, sup2) after elimination.
    let mut sub: Vec<T> = (0..n).map(|i| if i > 0 { e[i - 1] } else { T::zero() }).collect();
    let mut dia: Vec<T> = d.iter().map(|&v| v - sigma).collect();
    let mut sup: Vec<T> = (0..n).map(|i| if i + 1 < n { e[i] } else { T::zero() }).collect();
    let mut sup2 = vec![T::zero(); n];
    let mut rhs = b.to_vec();
    for i in 0..n.saturating_sub(1) {
        if sub[i + 1].abs() > dia[i].abs() {
            // Swap rows i and i+1.
            std::mem::swap(&mut dia[i], &mut sub[i + 1]);
            std::mem::swap(&mut sup[i], &mut dia[i + 1]);
            let s2 = if i + 1 < n { sup[i + 1] } else { T::zero() };
            sup2[i] = s2;
            sup[i + 1] = T::zero();
            rhs.swap(i, i + 1);
            let f = sub[i + 1] / dia[i];
            dia[i + 1] -= f * sup[i];
            sup[i + 1] -= f * sup2[i];
            let r = rhs[i];
            rhs[i + 1] -= f * r;
            sub[i + 1] = T::zero();
        } else {
            let piv = if dia[i].abs() < pivmin { pivmin } else { dia[i] };
            dia[i] = piv;
            let f = sub[i + 1] / piv;
            dia[i + 1] -= f * sup[i];
            let r = rhs[i];
            rhs[i + 1] -= f * r;
            sub[i + 1] = T::zero();
        }
    }
    if dia[n - 1].abs() < pivmin {
        dia[n - 1] = pivmin;
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        if i + 1 < n {
            acc -= sup[i] * x[i + 1];
        }
        if i + 2 < n {
            acc -= sup2[i] * x[i + 2];
        }
        x[i] = acc / dia[i];
    }
    x
}

fn normalize<T: Real>(v: &mut [T]) {
    let norm = v.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

/// Lowest `k` eigenpairs of the symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e`. Eigenvectors are unit-norm, sign-fixed so the first
/// component exceeding `1e-8` in magnitude is positive.
pub fn lowest_eigenpairs<T: Real>(d: &[T], e: &[T], k: usize) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = d.len();
    if n == 0 || e.len() + 1 != n {
        return Err(Error::Precondition("tridiagonal dimensions mismatch".into()));
    }
    if k > n {
        return Err(Error::Precondition(format!("requested {k} levels from dimension {n}")));
    }
    let mut lo = d[0];
    let mut hi = d[0];
    for i in 0..n {
        let r = (if i > 0 { e[i - 1].abs() } else { T::zero() }) + (if i + 1 < n { e[i].abs() } else { T::zero() });
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(T::one());
    let eps = T::default_epsilon();
    let pivmin = eps * eps * scale;
    let mut values = Vec::with_capacity(k);
    for j in 0..k {
        let (mut a, mut b) = (lo - eps * scale, hi + eps * scale);
        for _ in 0..200 {
            let mid = (a + b) * T::lit(0.5);
            if mid <= a || mid >= b || b - a <= T::lit(2.0) * eps * (a.abs().max(b.abs())) + pivmin {
                break;
            }
            if sturm_count(d, e, mid, pivmin) > j {
                b = mid;
            } else {
                a = mid;
            }
        }
        values.push((a + b) * T::lit(0.5));
    }
    let mut vectors: Vec<Vec<T>> = Vec::with_capacity(k);
    for (j, &lam) in values.iter().enumerate() {
        let sigma = lam + eps * scale * T::lit(4.0);
        let mut v: Vec<T> = (0..n)
            .map(|i| T::one() + T::lit(0.01) * T::count((i * 7 + j * 3) % 11))
            .collect();
        normalize(&mut v);
        for _ in 0..4 {
            v = shifted_solve(d, e, sigma, &v, pivmin);
            for prev in &vectors {
                let dot = prev.iter().zip(v.iter()).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                for (x, &p) in v.iter_mut().zip(prev.iter()) {
                    *x -= dot * p;
                }
            }
            normalize(&mut v);
        }
        let thresh = T::lit(1e-8);
        if let Some(first) = v.iter().find(|x| x.abs() > thresh) {
            if *first < T::zero() {
                for x in v.iter_mut() {
                    *x = -*x;
                }
            }
        }
        vectors.push(v);
    }
    Ok((values, vectors))
}
