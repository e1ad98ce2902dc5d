//! Log-log (and semi-log) regression used for every quantitative decay/growth check.

use serde::Serialize;

use crate::{Error, Result};

/// Axis scaling of a fit: `log y` against `log x` or against `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitScale {
    LogLog,
    SemiLog,
}

/// Pass/fail rule applied to a fitted (signed) exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    AtLeast { bound: f64 },
    AtMost { bound: f64 },
    Within { target: f64, tol: f64 },
}

impl Gate {
    pub fn check(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match *self {
            Gate::AtLeast { bound } => value >= bound,
            Gate::AtMost { bound } => value <= bound,
            Gate::Within { target, tol } => (value - target).abs() <= tol,
        }
    }
}

impl std::fmt::Display for Gate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Gate::AtLeast { bound } => write!(f, ">= {bound:?}"),
            Gate::AtMost { bound } => write!(f, "<= {bound:?}"),
            Gate::Within { target, tol } => write!(f, "{target:?} +- {tol:?}"),
        }
    }
}

/// Result of a regression `log y = log C + exponent * (log x | x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Signed slope; decay laws have negative exponents.
    pub exponent: f64,
    pub constant: f64,
    /// Residual RMS in log space.
    pub rms: f64,
    /// Standard error of the slope (zero for two points).
    pub stderr: f64,
    /// Approximate 95% band on the slope.
    pub band: (f64, f64),
    pub bins: usize,
    pub range: (f64, f64),
    pub scale: FitScale,
    /// The data fell below its accuracy floor inside the window: decay is faster
    /// than any power the remaining bins can resolve.
    pub superpolynomial: bool,
    pub target: Option<Gate>,
    pub pass: Option<bool>,
}

impl DecayFit {
    pub fn with_gate(mut self, gate: Gate) -> Self {
        self.pass = Some(gate.check(self.exponent));
        self.target = Some(gate);
        self
    }

    pub fn passed(&self) -> bool {
        self.pass.unwrap_or(false)
    }

    /// Fitted value `C x^exponent` (or `C e^{exponent x}`).
    pub fn predict(&self, x: f64) -> f64 {
        match self.scale {
            FitScale::LogLog => self.constant * x.powf(self.exponent),
            FitScale::SemiLog => self.constant * (self.exponent * x).exp(),
        }
    }
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, rms, stderr_b)`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return Err(Error::Degenerate(format!("regression needs >= 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= f64::EPSILON * mx.abs().max(1.0) {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let rms = (sse / nf).sqrt();
    let stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok((a, b, rms, stderr))
}

fn build(xs: &[f64], ys: &[f64], scale: FitScale, raw_range: (f64, f64)) -> Result<DecayFit> {
    let (a, b, rms, stderr) = linear_regression(xs, ys)?;
    Ok(DecayFit {
        exponent: b,
        constant: a.exp(),
        rms,
        stderr,
        band: (b - 2.0 * stderr, b + 2.0 * stderr),
        bins: xs.len(),
        range: raw_range,
        scale,
        superpolynomial: false,
        target: None,
        pass: None,
    })
}

/// Fit `y ~ C x^p` over the points with `x > 0` and `y > 0`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<DecayFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    let range = range_of(xs.iter().copied().filter(|x| *x > 0.0));
    build(&lx, &ly, FitScale::LogLog, range)
}

/// Fit `y ~ C e^{b x}` over the points with `y > 0`.
pub fn fit_semilog(xs: &[f64], ys: &[f64]) -> Result<DecayFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (*x, y.ln()))
        .unzip();
    let range = range_of(xs.iter().copied());
    build(&lx, &ly, FitScale::SemiLog, range)
}

fn range_of(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// One geometric bin `[lo, lo * ratio)` summarised by its largest value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    /// Abscissa at which the maximum is attained.
    pub x: f64,
    pub max: f64,
    pub count: usize,
}

/// Groups `(x, y)` into geometric bins starting at `start` with the given ratio,
/// keeping the per-bin maximum of `|y|`. Points with `x < start` are ignored.
pub fn geometric_bins(points: &[(f64, f64)], start: f64, ratio: f64) -> Vec<Bin> {
    let mut bins: Vec<Option<Bin>> = Vec::new();
    for &(x, y) in points {
        if !(x >= start) || !y.is_finite() {
            continue;
        }
        let idx = ((x / start).ln() / ratio.ln() + 1e-12).floor() as usize;
        if bins.len() <= idx {
            bins.resize(idx + 1, None);
        }
        let lo = start * ratio.powi(idx as i32);
        let y = y.abs();
        let slot = bins[idx].get_or_insert(Bin { lo, x, max: y, count: 0 });
        slot.count += 1;
        if y > slot.max || (y == slot.max && x < slot.x) {
            slot.max = y;
            slot.x = x;
        }
    }
    bins.into_iter().flatten().collect()
}

/// Requirements for a binned decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinPolicy {
    pub min_bins: usize,
    pub min_span: f64,
    /// Values at or below this are treated as noise.
    pub floor: f64,
}

impl Default for BinPolicy {
    fn default() -> Self {
        BinPolicy { min_bins: 6, min_span: 8.0, floor: 0.0 }
    }
}

/// Log-log fit of per-bin maxima against the abscissa where each maximum sits.
///
/// Bins whose maximum is at or below the noise floor are dropped; when that
/// leaves too few bins but at least three, the fit is returned flagged
/// `superpolynomial` instead of failing.
pub fn fit_bins(bins: &[Bin], policy: &BinPolicy) -> Result<DecayFit> {
    let usable: Vec<&Bin> = bins.iter().filter(|b| b.max > policy.floor && b.max > 0.0).collect();
    let dropped = usable.len() < bins.len();
    let xs: Vec<f64> = usable.iter().map(|b| b.x).collect();
    let ys: Vec<f64> = usable.iter().map(|b| b.max).collect();
    let span = xs.iter().cloned().fold(0.0, f64::max) / xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let enough = usable.len() >= policy.min_bins && span >= policy.min_span;
    if enough {
        return fit_loglog(&xs, &ys);
    }
    // values vanished inside the window: faster than any resolvable power
    let vanished = dropped && bins.last().map_or(false, |b| b.max <= policy.floor);
    if vanished && usable.len() >= 3 {
        let mut fit = fit_loglog(&xs, &ys)?;
        fit.superpolynomial = true;
        return Ok(fit);
    }
    Err(Error::Degenerate(format!(
        "{} usable bins spanning a factor {:.2}; need {} spanning {}",
        usable.len(),
        span,
        policy.min_bins,
        policy.min_span
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let xs: Vec<f64> = (0..10).map(|j| 2f64.powi(j)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.7)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.exponent + 1.7).abs() < 1e-12);
        assert!((fit.constant - 3.0).abs() < 1e-10);
        assert!(fit.rms < 1e-12);
        assert!((fit.predict(5.0) - 3.0 * 5f64.powf(-1.7)).abs() < 1e-10);
    }

    #[test]
    fn semilog_recovers_rate() {
        let xs: Vec<f64> = (0..8).map(|j| j as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (-0.8 * x).exp()).collect();
        let fit = fit_semilog(&xs, &ys).unwrap();
        assert!((fit.exponent + 0.8).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(fit_loglog(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_loglog(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn gates() {
        assert!(Gate::Within { target: -0.5, tol: 0.05 }.check(-0.52));
        assert!(!Gate::Within { target: -0.5, tol: 0.05 }.check(-0.56));
        assert!(Gate::AtMost { bound: 0.7 }.check(0.5));
        assert!(!Gate::AtLeast { bound: 3.0 }.check(f64::NAN));
    }

    #[test]
    fn bins_keep_maxima() {
        let pts: Vec<(f64, f64)> = (1..200).map(|d| (d as f64, (1.0 + d as f64).powi(-3))).collect();
        let bins = geometric_bins(&pts, 1.0, 2.0);
        assert_eq!(bins.len(), 8);
        assert_eq!(bins[0].x, 1.0);
        assert_eq!(bins[3].x, 8.0);
        let fit = fit_bins(&bins, &BinPolicy::default()).unwrap();
        assert!(fit.exponent < -2.5);
    }

    #[test]
    fn vanishing_values_flag_superpolynomial() {
        let pts: Vec<(f64, f64)> = (1..200).map(|d| (d as f64, (-(d as f64).powi(2) / 8.0).exp())).collect();
        let bins = geometric_bins(&pts, 1.0, 2.0);
        let fit = fit_bins(&bins, &BinPolicy { floor: 1e-15, ..Default::default() }).unwrap();
        assert!(fit.superpolynomial);
        assert!(fit.exponent < -5.0);
    }
}
