//! Cubic splines: natural (non-uniform knots) and periodic (uniform knots).

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Natural cubic spline through `(x_i, y_i)` with strictly increasing knots.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline<T> {
    x: Vec<T>,
    y: Vec<T>,
    m: Vec<T>,
}

impl<T: Real> NaturalSpline<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Precondition(
                "spline needs at least two knots with matching values".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition("spline knots must be strictly increasing".into()));
        }
        let mut m = vec![T::zero(); n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives.
            let k = n - 2;
            let mut diag = vec![T::zero(); k];
            let mut upper = vec![T::zero(); k];
            let mut rhs = vec![T::zero(); k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i - 1] = T::lit(2.0) * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = T::lit(6.0) * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] = rhs[i] - w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(NaturalSpline { x, y, m })
    }

    fn segment(&self, t: T) -> usize {
        let n = self.x.len();
        if t <= self.x[0] {
            return 0;
        }
        if t >= self.x[n - 1] {
            return n - 2;
        }
        match self
            .x
            .binary_search_by(|v| v.partial_cmp(&t).expect("finite knots"))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        }
    }

    pub fn value(&self, t: T) -> T {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let six = T::lit(6.0);
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / six
    }

    pub fn derivative(&self, t: T) -> T {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let six = T::lit(6.0);
        (self.y[i + 1] - self.y[i]) / h
            + (-(T::lit(3.0) * a * a - T::one()) * self.m[i] + (T::lit(3.0) * b * b - T::one()) * self.m[i + 1]) * h
                / six
    }

    pub fn knots(&self) -> &[T] {
        &self.x
    }

    pub fn values(&self) -> &[T] {
        &self.y
    }
}

/// Periodic cubic spline on uniform samples `y_i = f(i·period/n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline<T> {
    period: T,
    y: Vec<T>,
    m: Vec<T>,
}

impl<T: Real> PeriodicSpline<T> {
    pub fn new(period: T, y: Vec<T>) -> Result<Self> {
        let n = y.len();
        if n < 4 {
            return Err(Error::Precondition("periodic spline needs at least four samples".into()));
        }
        let h = period / T::count(n);
        let rhs: Vec<T> = (0..n)
            .map(|i| {
                let ym = y[(i + n - 1) % n];
                let yp = y[(i + 1) % n];
                T::lit(6.0) * (yp - T::lit(2.0) * y[i] + ym) / (h * h)
            })
            .collect();
        let m = solve_cyclic_141(&rhs);
        Ok(PeriodicSpline { period, y, m })
    }

    pub fn value(&self, t: T) -> T {
        let n = self.y.len();
        let h = self.period / T::count(n);
        let r = t / self.period;
        let s = r - r.floor();
        let u = s * T::count(n);
        let mut i = u.floor().to_usize().unwrap_or(0);
        if i >= n {
            i = n - 1;
        }
        let b = u - T::count(i);
        let a = T::one() - b;
        let j = (i + 1) % n;
        let six = T::lit(6.0);
        a * self.y[i] + b * self.y[j] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[j]) * h * h / six
    }
}

/// Solve the cyclic system `m_{i-1} + 4 m_i + m_{i+1} = r_i` by Sherman–Morrison.
fn solve_cyclic_141<T: Real>(r: &[T]) -> Vec<T> {
    let n = r.len();
    let four = T::lit(4.0);
    // Split A = B + u v^T with u = (γ, 0, …, 1), v = (1, 0, …, 1/γ).
    let gamma = -four;
    let mut diag = vec![four; n];
    diag[0] = four - gamma;
    diag[n - 1] = four - T::one() / gamma;
    let solve = |rhs: &[T]| -> Vec<T> {
        let mut c = vec![T::zero(); n];
        let mut d = vec![T::zero(); n];
        c[0] = T::one() / diag[0];
        d[0] = rhs[0] / diag[0];
        for i in 1..n {
            let denom = diag[i] - c[i - 1];
            c[i] = T::one() / denom;
            d[i] = (rhs[i] - d[i - 1]) / denom;
        }
        let mut x = vec![T::zero(); n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    };
    let y = solve(r);
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = T::one();
    let z = solve(&u);
    let vy = y[0] + y[n - 1] / gamma;
    let vz = z[0] + z[n - 1] / gamma;
    let factor = vy / (T::one() + vz);
    y.iter().zip(z.iter()).map(|(&a, &b)| a - factor * b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_spline_reproduces_line() {
        let s = NaturalSpline::<f64>::new(vec![0.0, 0.3, 1.0, 2.5], vec![1.0, 1.6, 3.0, 6.0]).unwrap();
        assert!((s.value(1.7) - 4.4).abs() < 1e-14);
        assert!((s.derivative(0.1) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn periodic_spline_tracks_sine() {
        let n = 128;
        let period = 2.0 * std::f64::consts::PI;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * period / n as f64).sin()).collect();
        let s = PeriodicSpline::new(period, y).unwrap();
        for k in 0..50 {
            let t = 0.137 * k as f64 - 2.0;
            assert!((s.value(t) - t.sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(NaturalSpline::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }
}
