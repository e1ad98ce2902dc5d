//! Scalar multiplier functions `F: R -> R` consumed by the functional calculus.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{Error, Real, Result};

/// Closed support interval `[lo, hi]`; `lo` may be `-inf` for one-sided profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Support<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Support<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Support { lo, hi }
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    /// Open-interval containment `(lo, hi) ⊂ (a, b)`.
    pub fn inside_open(&self, a: T, b: T) -> bool {
        self.lo > a && self.hi < b
    }
}

/// Declared regularity of a multiplier (`H^s` / `W^{s,q}` index), carried as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Smoothness {
    pub s: Option<f64>,
    pub q: Option<f64>,
}

#[derive(Clone)]
enum Rule<T> {
    Closed(Arc<dyn Fn(T) -> T + Send + Sync>),
    Sampled { xs: Vec<T>, ys: Vec<T> },
}

/// A bounded function of the spectral variable, given by a closed form or by
/// samples with linear interpolation. Evaluates to zero off its support.
#[derive(Clone)]
pub struct MultiplierFunction<T> {
    rule: Rule<T>,
    support: Support<T>,
    smoothness: Smoothness,
    label: String,
}

impl<T: Real> fmt::Debug for MultiplierFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiplierFunction")
            .field("label", &self.label)
            .field("support", &self.support)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl<T: Real> MultiplierFunction<T> {
    pub fn closed<F>(label: impl Into<String>, lo: T, hi: T, f: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        MultiplierFunction {
            rule: Rule::Closed(Arc::new(f)),
            support: Support::new(lo, hi),
            smoothness: Smoothness::default(),
            label: label.into(),
        }
    }

    /// Piecewise-linear interpolant through `(xs, ys)`; `xs` strictly increasing.
    pub fn sampled(label: impl Into<String>, xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::InvalidArgument(
                "sampled multiplier needs at least two (x, y) pairs of equal length".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("sample abscissae must be strictly increasing".into()));
        }
        let support = Support::new(xs[0], xs[xs.len() - 1]);
        Ok(MultiplierFunction {
            rule: Rule::Sampled { xs, ys },
            support,
            smoothness: Smoothness::default(),
            label: label.into(),
        })
    }

    pub fn with_smoothness(mut self, s: Option<f64>, q: Option<f64>) -> Self {
        self.smoothness = Smoothness { s, q };
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support(&self) -> Support<T> {
        self.support
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn eval(&self, x: T) -> T {
        if !self.support.contains(x) {
            return T::zero();
        }
        match &self.rule {
            Rule::Closed(f) => f(x),
            Rule::Sampled { xs, ys } => {
                let pos = xs.partition_point(|&v| v <= x);
                if pos == 0 {
                    return ys[0];
                }
                if pos >= xs.len() {
                    return ys[xs.len() - 1];
                }
                let (x0, x1) = (xs[pos - 1], xs[pos]);
                let w = (x - x0) / (x1 - x0);
                ys[pos - 1] * (T::one() - w) + ys[pos] * w
            }
        }
    }

    pub fn zero() -> Self {
        Self::closed("zero", T::zero(), T::zero(), |_| T::zero())
    }

    pub fn constant(c: T, lo: T, hi: T) -> Self {
        Self::closed(format!("constant({c})"), lo, hi, move |_| c)
    }

    pub fn identity(lo: T, hi: T) -> Self {
        Self::closed("identity", lo, hi, |x| x)
    }

    pub fn indicator(lo: T, hi: T) -> Self {
        Self::closed(format!("indicator[{lo},{hi}]"), lo, hi, |_| T::one())
    }

    /// `C^infinity` bump `exp(1 - 1/(1-u^2))` on `(a, b)`, peak value 1 at the midpoint.
    pub fn bump(a: T, b: T) -> Self {
        Self::bump_steep(a, b, T::one())
    }

    /// `exp(c (1 - 1/(1-u^2)))` on `(a, b)`. Larger `c` gives a near-Gaussian core
    /// with flatter edges, so kernels decay faster at moderate range.
    pub fn bump_steep(a: T, b: T, c: T) -> Self {
        let mid = (a + b) / T::of(2.0);
        let half = (b - a) / T::of(2.0);
        let label = if c == T::one() { format!("bump({a},{b})") } else { format!("bump({a},{b};{c})") };
        Self::closed(label, a, b, move |x| {
            let u = (x - mid) / half;
            let r = T::one() - u * u;
            if r <= T::zero() {
                T::zero()
            } else {
                (c * (T::one() - T::one() / r)).exp()
            }
        })
    }

    /// `exp(-x^2 / (2 sigma^2))`, truncated to `|x| <= 8.5 sigma` (tail below `2e-16`).
    pub fn gaussian(sigma: T) -> Self {
        let cut = T::of(8.5) * sigma;
        let two_s2 = T::of(2.0) * sigma * sigma;
        Self::closed(format!("gaussian({sigma})"), -cut, cut, move |x| (-(x * x) / two_s2).exp())
    }

    /// `x -> F(t x)` for `t > 0`.
    pub fn dilate(&self, t: T) -> Self {
        let inner = self.clone();
        let support = Support::new(self.support.lo / t, self.support.hi / t);
        MultiplierFunction {
            rule: Rule::Closed(Arc::new(move |x| inner.eval(t * x))),
            support,
            smoothness: self.smoothness,
            label: format!("{}(t={t})", self.label),
        }
    }

    /// Pointwise product on the intersection of supports.
    pub fn product(&self, other: &Self) -> Self {
        let (f, g) = (self.clone(), other.clone());
        let lo = self.support.lo.max(other.support.lo);
        let hi = self.support.hi.min(other.support.hi).max(lo);
        Self::closed(
            format!("{}*{}", self.label, other.label),
            lo,
            hi,
            move |x| f.eval(x) * g.eval(x),
        )
    }
}
