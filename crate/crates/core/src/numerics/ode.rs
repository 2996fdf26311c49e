//! Classical fourth-order Runge–Kutta with step-doubling error control.
//!
//! States are fixed-size arrays. In adaptive mode each step is taken once with
//! `h` and twice with `h/2`; the difference, divided by 15, estimates the local
//! error of the two-half-step result, which is the one kept (the scheme stays
//! fourth order; no Richardson extrapolation is applied).

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl<T> {
    /// Error-controlled stepping with local tolerance `tol` and step cap `h_max`.
    Adaptive { tol: T, h_max: T },
    /// Constant step `h` (last step shortened to land on the end time).
    Fixed { h: T },
}

impl<T: Real> StepControl<T> {
    pub fn adaptive(tol: f64, h_max: T) -> Self {
        StepControl::Adaptive {
            tol: T::tol(tol),
            h_max,
        }
    }

    pub fn initial_step(&self) -> T {
        match *self {
            StepControl::Adaptive { h_max, .. } => h_max,
            StepControl::Fixed { h } => h,
        }
    }
}

#[inline]
fn axpy<T: Real, const N: usize>(y: &[T; N], a: T, k: &[T; N]) -> [T; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

pub fn rk4_step<T: Real, const N: usize, F>(f: &F, t: T, y: &[T; N], h: T) -> [T; N]
where
    F: Fn(T, &[T; N]) -> [T; N],
{
    let half = h * T::lit(0.5);
    let k1 = f(t, y);
    let k2 = f(t + half, &axpy(y, half, &k1));
    let k3 = f(t + half, &axpy(y, half, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    let sixth = h / T::lit(6.0);
    let mut out = *y;
    for i in 0..N {
        out[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

/// Two half steps plus a scaled local error estimate.
pub fn doubled_step<T: Real, const N: usize, F>(f: &F, t: T, y: &[T; N], h: T) -> ([T; N], T)
where
    F: Fn(T, &[T; N]) -> [T; N],
{
    let coarse = rk4_step(f, t, y, h);
    let half = h * T::lit(0.5);
    let mid = rk4_step(f, t, y, half);
    let fine = rk4_step(f, t + half, &mid, half);
    let mut err = T::zero();
    for i in 0..N {
        let e = (fine[i] - coarse[i]).abs() / (T::lit(15.0) * (T::one() + fine[i].abs()));
        if e > err || !e.is_finite() {
            err = e;
        }
    }
    (fine, err)
}

/// Outcome of one attempted step.
#[derive(Debug, Clone, Copy)]
pub struct Step<T, const N: usize> {
    pub h: T,
    pub y: [T; N],
    /// Suggested size of the next step.
    pub h_next: T,
}

/// Take one accepted step of size at most `h` (shrinking on rejection).
pub fn step<T: Real, const N: usize, F>(
    f: &F,
    t: T,
    y: &[T; N],
    h: T,
    ctrl: StepControl<T>,
) -> Result<Step<T, N>>
where
    F: Fn(T, &[T; N]) -> [T; N],
{
    match ctrl {
        StepControl::Fixed { h: nominal } => Ok(Step {
            h,
            y: rk4_step(f, t, y, h),
            h_next: nominal,
        }),
        StepControl::Adaptive { tol, h_max } => {
            let mut h = h.min(h_max);
            let h_floor = T::default_epsilon() * (T::one() + t.abs()) * T::lit(16.0);
            loop {
                let (fine, err) = doubled_step(f, t, y, h);
                if err <= tol && err.is_finite() {
                    let grow = if err == T::zero() {
                        T::lit(4.0)
                    } else {
                        (T::lit(0.9) * (tol / err).powf(T::lit(0.2))).min(T::lit(4.0))
                    };
                    return Ok(Step {
                        h,
                        y: fine,
                        h_next: (h * grow.max(T::one())).min(h_max),
                    });
                }
                let shrink = if err.is_finite() {
                    (T::lit(0.9) * (tol / err).powf(T::lit(0.2))).max(T::lit(0.1))
                } else {
                    T::lit(0.1)
                };
                h *= shrink.min(T::lit(0.5));
                if h < h_floor {
                    return Err(Error::numerical(
                        "rk4",
                        format!("step underflow at t = {t} (h = {h})"),
                    ));
                }
            }
        }
    }
}

/// Advance an accepted state over the exact length `h` in one or more controlled steps.
pub fn advance_exact<T: Real, const N: usize, F>(
    f: &F,
    t: T,
    y: &[T; N],
    h: T,
    ctrl: StepControl<T>,
) -> Result<[T; N]>
where
    F: Fn(T, &[T; N]) -> [T; N],
{
    let (y1, _) = integrate(f, t, *y, t + h, ctrl, h)?;
    Ok(y1)
}

/// Integrate from `t0` to `t1` (`t1 >= t0`), landing exactly on `t1`.
/// Returns the final state and the suggested next step.
pub fn integrate<T: Real, const N: usize, F>(
    f: &F,
    t0: T,
    y0: [T; N],
    t1: T,
    ctrl: StepControl<T>,
    h_init: T,
) -> Result<([T; N], T)>
where
    F: Fn(T, &[T; N]) -> [T; N],
{
    let mut t = t0;
    let mut y = y0;
    let mut h = h_init;
    let mut guard = 0usize;
    while t < t1 {
        let remaining = t1 - t;
        let last = h >= remaining;
        let trial = if last { remaining } else { h };
        let s = step(f, t, &y, trial, ctrl)?;
        y = s.y;
        if last && s.h == trial {
            t = t1;
        } else {
            t += s.h;
        }
        h = s.h_next;
        guard += 1;
        if guard > 50_000_000 {
            return Err(Error::numerical("rk4", "too many steps"));
        }
    }
    Ok((y, h))
}

/// Result of [`integrate_to_crossing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event<T, const N: usize> {
    /// The event fired at `t`; `y` is the state just past the crossing.
    Crossed { t: T, y: [T; N] },
    /// `t_max` was reached first.
    Reached { y: [T; N], h_next: T },
}

impl<T: Copy, const N: usize> Event<T, N> {
    pub fn crossed(self) -> Option<(T, [T; N])> {
        match self {
            Event::Crossed { t, y } => Some((t, y)),
            Event::Reached { .. } => None,
        }
    }
}

/// Integrate until `g(y)` crosses zero with the requested direction
/// (`+1`: negative to non-negative, `-1`: positive to non-positive),
/// or until `t_max`. The crossing time is refined by bisection on the step
/// length to an absolute width `t_tol`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_to_crossing<T: Real, const N: usize, F, G>(
    f: &F,
    t0: T,
    y0: [T; N],
    g: G,
    direction: i8,
    t_max: T,
    ctrl: StepControl<T>,
    t_tol: T,
) -> Result<Event<T, N>>
where
    F: Fn(T, &[T; N]) -> [T; N],
    G: Fn(&[T; N]) -> T,
{
    let crossed = |before: T, after: T| -> bool {
        if direction > 0 {
            before < T::zero() && after >= T::zero()
        } else {
            before > T::zero() && after <= T::zero()
        }
    };
    let mut t = t0;
    let mut y = y0;
    let mut h = ctrl.initial_step();
    let mut g_prev = g(&y);
    let mut guard = 0usize;
    while t < t_max {
        let trial = h.min(t_max - t);
        let s = step(f, t, &y, trial, ctrl)?;
        let g_new = g(&s.y);
        if crossed(g_prev, g_new) {
            // Bisect on the step length; each probe re-integrates from the step start.
            let (mut lo, mut hi) = (T::zero(), s.h);
            let mut y_hi = s.y;
            while hi - lo > t_tol {
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                let ym = advance_exact(f, t, &y, mid, ctrl)?;
                if crossed(g_prev, g(&ym)) {
                    hi = mid;
                    y_hi = ym;
                } else {
                    lo = mid;
                }
            }
            return Ok(Event::Crossed { t: t + hi, y: y_hi });
        }
        if s.h == trial && trial == t_max - t {
            t = t_max;
        } else {
            t += s.h;
        }
        y = s.y;
        g_prev = g_new;
        h = s.h_next;
        guard += 1;
        if guard > 50_000_000 {
            return Err(Error::numerical("rk4", "too many steps"));
        }
    }
    Ok(Event::Reached { y, h_next: h })
}
