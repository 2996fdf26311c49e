use std::fmt;
use std::sync::Arc;

use super::ParamValue;
use crate::error::{Error, Result};
use crate::numerics::spline::NaturalSpline;
use crate::scalar::Real;

type CustomFn<T> = Arc<dyn Fn(T) -> (T, T) + Send + Sync>;

/// Shape of a driving protocol `L(t)` on `[0, T]`.
#[derive(Clone)]
pub enum ScheduleKind<T> {
    Constant(T),
    /// `L₀ + (L₁ − L₀) t/T`
    Linear { from: T, to: T },
    /// `L₀ + (L₁ − L₀)(3s² − 2s³)`, `s = t/T`
    Smoothstep { from: T, to: T },
    /// `L₀ + (L₁ − L₀)(1 − cos πs)/2`
    Cosine { from: T, to: T },
    /// Cubic interpolation through samples. The rate is the derivative of the
    /// value spline unless an explicit rate column is supplied.
    Tabulated {
        values: NaturalSpline<T>,
        rates: Option<NaturalSpline<T>>,
    },
    /// User closure returning `(L(t), L̇(t))`.
    Custom { tag: String, f: CustomFn<T> },
}

/// A protocol `λ(t)` with its exact time derivative.
#[derive(Clone)]
pub struct Schedule<T> {
    kind: ScheduleKind<T>,
    duration: T,
}

impl<T: Real> fmt::Debug for Schedule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Schedule({}, T = {})", self.tag(), self.duration)
    }
}

impl<T: Real> Schedule<T> {
    pub fn new(kind: ScheduleKind<T>, duration: T) -> Result<Self> {
        if !(duration > T::zero() && duration.is_finite()) {
            return Err(Error::Precondition(format!("schedule duration must be positive, got {duration}")));
        }
        Ok(Schedule { kind, duration })
    }

    pub fn constant(length: T, duration: T) -> Result<Self> {
        Self::new(ScheduleKind::Constant(length), duration)
    }

    pub fn linear(from: T, to: T, duration: T) -> Result<Self> {
        Self::new(ScheduleKind::Linear { from, to }, duration)
    }

    pub fn smoothstep(from: T, to: T, duration: T) -> Result<Self> {
        Self::new(ScheduleKind::Smoothstep { from, to }, duration)
    }

    pub fn cosine(from: T, to: T, duration: T) -> Result<Self> {
        Self::new(ScheduleKind::Cosine { from, to }, duration)
    }

    /// Table `(t_i, L_i)` with `t_0 = 0` and `t_last = T`, optionally with rates.
    pub fn tabulated(times: Vec<T>, values: Vec<T>, rates: Option<Vec<T>>) -> Result<Self> {
        let (first, last) = match (times.first(), times.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return Err(Error::Precondition("tabulated schedule is empty".into())),
        };
        if first != T::zero() {
            return Err(Error::Precondition("tabulated schedule must start at t = 0".into()));
        }
        let rates = match rates {
            Some(r) => Some(NaturalSpline::new(times.clone(), r)?),
            None => None,
        };
        let values = NaturalSpline::new(times, values)?;
        Self::new(ScheduleKind::Tabulated { values, rates }, last)
    }

    pub fn custom(tag: impl Into<String>, duration: T, f: impl Fn(T) -> (T, T) + Send + Sync + 'static) -> Result<Self> {
        Self::new(
            ScheduleKind::Custom {
                tag: tag.into(),
                f: Arc::new(f),
            },
            duration,
        )
    }

    pub fn duration(&self) -> T {
        self.duration
    }

    pub fn kind(&self) -> &ScheduleKind<T> {
        &self.kind
    }

    /// Same shape, new duration. Tabulated tables are rescaled in time.
    pub fn with_duration(&self, duration: T) -> Result<Self> {
        match &self.kind {
            ScheduleKind::Tabulated { values, rates } => {
                let s = duration / self.duration;
                let times: Vec<T> = values.knots().iter().map(|&t| t * s).collect();
                let rates = rates
                    .as_ref()
                    .map(|r| r.values().iter().map(|&v| v / s).collect::<Vec<T>>());
                Self::tabulated(times, values.values().to_vec(), rates)
            }
            ScheduleKind::Custom { .. } => Err(Error::Precondition(
                "custom schedules cannot be rescaled in time".into(),
            )),
            kind => Self::new(kind.clone(), duration),
        }
    }

    fn eval(&self, t: T) -> (T, T) {
        let big_t = self.duration;
        let s = (t / big_t).max(T::zero()).min(T::one());
        let inside = t >= T::zero() && t <= big_t;
        let pi = T::pi();
        match &self.kind {
            ScheduleKind::Constant(l) => (*l, T::zero()),
            ScheduleKind::Linear { from, to } => {
                let d = *to - *from;
                (*from + d * s, if inside { d / big_t } else { T::zero() })
            }
            ScheduleKind::Smoothstep { from, to } => {
                let d = *to - *from;
                let (two, three, six) = (T::lit(2.0), T::lit(3.0), T::lit(6.0));
                (*from + d * s * s * (three - two * s), d * six * s * (T::one() - s) / big_t)
            }
            ScheduleKind::Cosine { from, to } => {
                let d = *to - *from;
                let half = T::lit(0.5);
                (
                    *from + d * half * (T::one() - (pi * s).cos()),
                    d * half * pi * (pi * s).sin() / big_t,
                )
            }
            ScheduleKind::Tabulated { values, rates } => {
                let tc = t.max(T::zero()).min(big_t);
                let v = values.value(tc);
                let r = if !inside {
                    T::zero()
                } else {
                    match rates {
                        Some(r) => r.value(tc),
                        None => values.derivative(tc),
                    }
                };
                (v, r)
            }
            ScheduleKind::Custom { f, .. } => f(t),
        }
    }

    pub fn value(&self, t: T) -> ParamValue<T> {
        ParamValue::new(self.eval(t).0)
    }

    /// `λ̇(t)`
    pub fn rate(&self, t: T) -> ParamValue<T> {
        ParamValue::new(self.eval(t).1)
    }

    pub fn initial(&self) -> ParamValue<T> {
        self.value(T::zero())
    }

    pub fn fin(&self) -> ParamValue<T> {
        self.value(self.duration)
    }

    /// Whether `λ̇` vanishes identically (checked on the validation samples).
    pub fn is_static(&self) -> bool {
        (0..=64).all(|k| self.eval(self.duration * T::count(k) / T::lit(64.0)).1 == T::zero())
    }

    /// Check positivity of `L` and that `rate` is the derivative of `value`:
    /// central differences at 64 interior times, relative tolerance `1e-6`
    /// against the largest rate on the samples.
    pub fn validate(&self) -> Result<()> {
        let n = 64usize;
        let big_t = self.duration;
        let h = T::default_epsilon().cbrt() * big_t;
        let times: Vec<T> = (0..n)
            .map(|k| big_t * (T::count(k) + T::lit(0.5)) / T::count(n))
            .collect();
        let mut scale = T::zero();
        let mut worst = (T::zero(), T::zero());
        for &t in &times {
            let (v, r) = self.eval(t);
            if !(v > T::zero() && v.is_finite() && r.is_finite()) {
                return Err(Error::Domain(format!("schedule {} gives L({t}) = {v}", self.tag())));
            }
            let lo = (t - h).max(T::zero());
            let hi = (t + h).min(big_t);
            let fd = (self.eval(hi).0 - self.eval(lo).0) / (hi - lo);
            scale = scale.max(r.abs()).max(fd.abs());
            let dev = (fd - r).abs();
            if dev > worst.0 {
                worst = (dev, t);
            }
        }
        for t in [T::zero(), big_t] {
            let v = self.eval(t).0;
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Domain(format!("schedule {} gives L({t}) = {v}", self.tag())));
            }
        }
        if worst.0 > T::tol(1e-6) * scale {
            return Err(Error::Precondition(format!(
                "schedule {}: rate deviates from d/dt value by {} at t = {} (scale {scale})",
                self.tag(),
                worst.0,
                worst.1
            )));
        }
        Ok(())
    }

    pub fn tag(&self) -> String {
        match &self.kind {
            ScheduleKind::Constant(l) => format!("constant({l})"),
            ScheduleKind::Linear { from, to } => format!("linear({from}->{to})"),
            ScheduleKind::Smoothstep { from, to } => format!("smoothstep({from}->{to})"),
            ScheduleKind::Cosine { from, to } => format!("cosine({from}->{to})"),
            ScheduleKind::Tabulated { values, rates } => format!(
                "tabulated({} knots{})",
                values.knots().len(),
                if rates.is_some() { ", explicit rates" } else { "" }
            ),
            ScheduleKind::Custom { tag, .. } => tag.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_rates_are_exact() {
        for s in [
            Schedule::<f64>::linear(1.0, 2.0, 0.05).unwrap(),
            Schedule::<f64>::smoothstep(1.0, 2.0, 0.05).unwrap(),
            Schedule::<f64>::cosine(1.0, 2.0, 0.05).unwrap(),
            Schedule::<f64>::constant(1.5, 3.0).unwrap(),
        ] {
            s.validate().unwrap();
            assert_eq!(s.initial().length, if s.tag().starts_with("constant") { 1.5 } else { 1.0 });
        }
        let s = Schedule::<f64>::smoothstep(1.0, 2.0, 1.0).unwrap();
        assert!((s.fin().length - 2.0).abs() < 1e-15);
        assert_eq!(s.rate(0.0).length, 0.0);
        assert!((s.rate(0.5).length - 1.5).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_rate_is_rejected() {
        let s = Schedule::custom("bad", 1.0, |t: f64| (1.0 + t, 2.0)).unwrap();
        assert!(matches!(s.validate(), Err(Error::Precondition(_))));
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
        let wrong = Schedule::<f64>::tabulated(times.clone(), values.clone(), Some(vec![3.0; 11])).unwrap();
        assert!(wrong.validate().is_err());
        let right = Schedule::<f64>::tabulated(times, values, Some(vec![1.0; 11])).unwrap();
        right.validate().unwrap();
    }

    #[test]
    fn nonpositive_length_is_rejected() {
        let s = Schedule::<f64>::linear(1.0, -1.0, 1.0).unwrap();
        assert!(matches!(s.validate(), Err(Error::Domain(_))));
    }

    #[test]
    fn rescaling_keeps_shape() {
        let s = Schedule::<f64>::cosine(1.0, 2.0, 1.0).unwrap().with_duration(0.5).unwrap();
        assert!((s.value(0.25).length - 1.5).abs() < 1e-15);
        let times = vec![0.0, 0.5, 1.0];
        let tab = Schedule::<f64>::tabulated(times, vec![1.0, 1.5, 2.0], None).unwrap();
        let half = tab.with_duration(0.5).unwrap();
        assert!((half.rate(0.25).length - 2.0).abs() < 1e-12);
    }
}
