//! `L^p -> L^q` norms of convolution operators on the periodic lattice and the
//! growth/boundedness sweeps built on them.

use std::io;
use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{bochner_riesz, sobolev_h};
use crate::fft;
use crate::fit::{fit_loglog, fit_semilog, DecayFit, Gate};
use crate::lattice::{functional_calculus, wave_kernel, GridSpec, LatticeKernel, Operand, DEFAULT_TAIL_TOL};
use crate::multiplier::MultiplierFunction;
use crate::{Error, Real, Result};

/// Two-sided estimate of `||T||_{p->q}` for `T f = f * kernel`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub p: f64,
    pub q: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_method: String,
    pub upper_method: String,
    /// `lower == upper` by an identity for convolution operators.
    pub exact: bool,
    /// The kernel's tail mass exceeds the tolerance: values describe the torus
    /// operator, not the lattice one.
    pub contaminated: bool,
}

impl NormReport {
    pub fn value(&self) -> f64 {
        self.upper
    }

    fn exact(p: f64, q: f64, v: f64, how: &str, contaminated: bool) -> Self {
        NormReport {
            p,
            q,
            lower: v,
            upper: v,
            lower_method: how.into(),
            upper_method: how.into(),
            exact: true,
            contaminated,
        }
    }
}

fn lr_norm<T: Real>(values: &[Complex<T>], r: f64) -> f64 {
    if r.is_infinite() {
        return values.iter().map(|v| v.norm().as_f64()).fold(0.0, f64::max);
    }
    values.iter().map(|v| v.norm().as_f64().powf(r)).sum::<f64>().powf(1.0 / r)
}

/// The identities `||T||_{1->1} = ||T||_{inf->inf} = ||k||_1`, `||T||_{2->2} = sup|m|`,
/// `||T||_{1->2} = ||T||_{2->inf} = ||k||_2`, `||T||_{1->inf} = ||k||_inf`.
fn exact_value<T: Real>(kernel: &LatticeKernel<T>, p: f64, q: f64) -> Option<(f64, &'static str)> {
    let inf = f64::INFINITY;
    Some(match (p, q) {
        _ if p == 1.0 && q == 1.0 => (kernel.l1().as_f64(), "kernel l1"),
        _ if p == inf && q == inf => (kernel.l1().as_f64(), "kernel l1 (duality)"),
        _ if p == 2.0 && q == 2.0 => (kernel.to_symbol().sup_abs().as_f64(), "symbol sup"),
        _ if p == 1.0 && q == 2.0 => (kernel.l2().as_f64(), "kernel l2"),
        _ if p == 2.0 && q == inf => (kernel.l2().as_f64(), "kernel l2 (Cauchy-Schwarz)"),
        _ if p == 1.0 && q == inf => (kernel.linf().as_f64(), "kernel sup"),
        _ => return None,
    })
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

/// Least log-convex combination of the exactly known norms at `(1/p, 1/q)`.
fn riesz_thorin<T: Real>(kernel: &LatticeKernel<T>, p: f64, q: f64) -> f64 {
    let inf = f64::INFINITY;
    let anchors: Vec<(f64, f64, f64)> = [(1.0, 1.0), (inf, inf), (2.0, 2.0), (1.0, 2.0), (2.0, inf), (1.0, inf)]
        .iter()
        .filter_map(|&(a, b)| exact_value(kernel, a, b).map(|(v, _)| (inv(a), inv(b), v.ln())))
        .collect();
    let (x, y) = (inv(p), inv(q));
    let mut best = f64::INFINITY;
    let tol = 1e-12;
    for i in 0..anchors.len() {
        let (xi, yi, li) = anchors[i];
        if (xi - x).abs() < tol && (yi - y).abs() < tol {
            best = best.min(li);
        }
        for j in i + 1..anchors.len() {
            let (xj, yj, lj) = anchors[j];
            // target on the segment i-j
            let (dx, dy) = (xj - xi, yj - yi);
            let len2 = dx * dx + dy * dy;
            let w = ((x - xi) * dx + (y - yi) * dy) / len2;
            let (px, py) = (xi + w * dx, yi + w * dy);
            if (-tol..=1.0 + tol).contains(&w) && (px - x).hypot(py - y) < tol {
                best = best.min((1.0 - w) * li + w * lj);
            }
            for &(xk, yk, lk) in &anchors[j + 1..] {
                let det = (xj - xi) * (yk - yi) - (xk - xi) * (yj - yi);
                if det.abs() < tol {
                    continue;
                }
                let a = ((x - xi) * (yk - yi) - (xk - xi) * (y - yi)) / det;
                let b = ((xj - xi) * (y - yi) - (x - xi) * (yj - yi)) / det;
                if a >= -tol && b >= -tol && a + b <= 1.0 + tol {
                    best = best.min((1.0 - a - b) * li + a * lj + b * lk);
                }
            }
        }
    }
    best.exp()
}

/// Young's inequality `||f * k||_q <= ||k||_r ||f||_p`, `1 + 1/q = 1/p + 1/r`.
fn young<T: Real>(kernel: &LatticeKernel<T>, p: f64, q: f64) -> f64 {
    let rinv = 1.0 + inv(q) - inv(p);
    let r = if rinv <= 0.0 { f64::INFINITY } else { 1.0 / rinv };
    lr_norm(kernel.values(), r)
}

/// Largest ratio `||f * k||_q / ||f||_p` over the probe family: `delta_0`, the
/// Hölder-extremal probe against the reflected kernel, random sign vectors and
/// modulated Gaussians (one at the frequency maximising the symbol).
pub fn probe_lower_bound<T: Real>(kernel: &LatticeKernel<T>, p: f64, q: f64, seed: u64) -> f64 {
    let grid = kernel.grid();
    let (n, m) = (grid.dim(), grid.samples());
    let len = grid.len();
    let symbol = kernel.to_symbol();
    let sym = symbol.values();
    let zero = Complex::new(T::zero(), T::zero());

    let mut probes: Vec<Vec<Complex<T>>> = Vec::new();
    let mut delta = vec![zero; len];
    delta[0] = Complex::new(T::one(), T::zero());
    probes.push(delta);

    // f(y) = conj(k(-y)) |k(-y)|^{p'-2}: attains the p -> inf norm at the origin
    let pp = if p == 1.0 { f64::INFINITY } else if p.is_infinite() { 1.0 } else { p / (p - 1.0) };
    let matched: Vec<Complex<T>> = (0..len)
        .map(|idx| {
            let d: Vec<i64> = grid.point(idx).iter().map(|v| -v).collect();
            let v = kernel.at(&d).conj();
            let a = v.norm();
            if a == T::zero() {
                zero
            } else if pp.is_infinite() {
                if a.as_f64() >= kernel.linf().as_f64() * (1.0 - 1e-12) {
                    v / a
                } else {
                    zero
                }
            } else {
                v * a.powf(T::of(pp - 2.0))
            }
        })
        .collect();
    probes.push(matched);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..32 {
        probes.push(
            (0..len)
                .map(|_| Complex::new(if rng.random::<bool>() { T::one() } else { -T::one() }, T::zero()))
                .collect(),
        );
    }

    let peak = (0..len)
        .max_by(|&a, &b| sym[a].norm().partial_cmp(&sym[b].norm()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let mut freqs = vec![peak, 0];
    while freqs.len() < 8 {
        freqs.push(rng.random_range(0..len));
    }
    let width = (m as f64 / 8.0).max(1.0);
    for (i, &fidx) in freqs.iter().enumerate() {
        let mut ms = vec![0usize; n];
        grid.indices(fidx, &mut ms);
        let xi: Vec<f64> = ms.iter().map(|&mj| grid.theta::<f64>(mj)).collect();
        let w = if i == 0 { width } else { width / (1 + i % 3) as f64 };
        probes.push(
            (0..len)
                .map(|idx| {
                    let d = grid.point(idx);
                    let r2: f64 = d.iter().map(|v| (v * v) as f64).sum();
                    let ph: f64 = d.iter().zip(&xi).map(|(a, b)| *a as f64 * b).sum();
                    let amp = (-r2 / (2.0 * w * w)).exp();
                    Complex::new(T::of(amp * ph.cos()), T::of(amp * ph.sin()))
                })
                .collect(),
        );
    }

    let scale = T::one() / T::of_usize(len);
    probes
        .into_par_iter()
        .map(|mut f| {
            let fp = lr_norm(&f, p);
            if fp == 0.0 {
                return 0.0;
            }
            fft::inverse(&mut f, n, m);
            for (v, s) in f.iter_mut().zip(sym) {
                *v = *v * *s;
            }
            fft::forward(&mut f, n, m);
            for v in f.iter_mut() {
                *v = *v * scale;
            }
            lr_norm(&f, q) / fp
        })
        .reduce(|| 0.0, f64::max)
}

/// `||T||_{p->q}` for `T f = f * kernel`, `1 <= p <= q <= inf`.
pub fn conv_norm<T: Real>(kernel: &LatticeKernel<T>, p: f64, q: f64) -> Result<NormReport> {
    conv_norm_seeded(kernel, p, q, 0)
}

pub fn conv_norm_seeded<T: Real>(kernel: &LatticeKernel<T>, p: f64, q: f64, seed: u64) -> Result<NormReport> {
    if !(p >= 1.0) || !(q >= 1.0) {
        return Err(Error::UnsupportedExponents { p, q, reason: "exponents must be >= 1".into() });
    }
    if q < p {
        return Err(Error::UnsupportedExponents {
            p,
            q,
            reason: "translation-invariant operators are bounded p -> q only for q >= p".into(),
        });
    }
    let contaminated = kernel.tail_mass().as_f64() > DEFAULT_TAIL_TOL;
    if let Some((v, how)) = exact_value(kernel, p, q) {
        return Ok(NormReport::exact(p, q, v, how, contaminated));
    }
    let rt = riesz_thorin(kernel, p, q);
    let yg = young(kernel, p, q);
    let (upper, upper_method) = if rt <= yg { (rt, "riesz-thorin") } else { (yg, "young") };
    let lower = probe_lower_bound(kernel, p, q, seed).min(upper);
    Ok(NormReport {
        p,
        q,
        lower,
        upper,
        lower_method: "probe family".into(),
        upper_method: upper_method.into(),
        exact: false,
        contaminated,
    })
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
    pub contaminated: bool,
}

impl SweepRow {
    fn from_report(parameter: f64, r: &NormReport) -> Self {
        SweepRow { parameter, lower: r.lower, upper: r.upper, exact: r.exact, contaminated: r.contaminated }
    }
}

/// CSV `(parameter, lower, upper, exact)`.
pub fn write_sweep_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "lower", "upper", "exact"])?;
    for r in rows {
        w.write_record([format!("{:?}", r.parameter), format!("{:?}", r.lower), format!("{:?}", r.upper), r.exact.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn l1_report<T: Real>(kernel: &LatticeKernel<T>) -> NormReport {
    NormReport::exact(1.0, 1.0, kernel.l1().as_f64(), "kernel l1", kernel.tail_mass().as_f64() > DEFAULT_TAIL_TOL)
}

/// Growth of `||e^{itA} A||_{1->1}` in `t`.
#[derive(Debug, Clone, Serialize)]
pub struct WaveGrowth {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<SweepRow>,
    /// Ladder points dropped because the kernel reached the edge of the grid.
    pub truncated: Vec<f64>,
    pub fit: DecayFit,
}

pub fn wave_growth_fit(grid: GridSpec, ts: &[f64]) -> Result<WaveGrowth> {
    if ts.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("wave times must be >= 0".into()));
    }
    let reports: Vec<(f64, NormReport)> =
        ts.par_iter().map(|&t| (t, l1_report(&wave_kernel::<f64>(grid, t)))).collect();
    let (kept, dropped): (Vec<_>, Vec<_>) = reports.into_iter().partition(|(_, r)| !r.contaminated);
    let rows: Vec<SweepRow> = kept.iter().map(|(t, r)| SweepRow::from_report(*t, r)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.parameter >= 1.0).map(|r| (r.parameter, r.upper)).unzip();
    let n = grid.dim();
    let fit = fit_loglog(&xs, &ys)?.with_gate(Gate::AtMost { bound: n as f64 / 2.0 + 0.2 });
    Ok(WaveGrowth { n, m: grid.samples(), rows, truncated: dropped.into_iter().map(|(t, _)| t).collect(), fit })
}

/// `||F_j(A) A||_{1->1} / ||F_j||_{H^s}` over dyadic dilates `F_j = F(2^j .)`.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplierCheck {
    pub s: f64,
    /// `(j, operator norm, Sobolev norm, ratio)`.
    pub rows: Vec<(i32, f64, f64, f64)>,
    pub truncated: Vec<i32>,
    /// Growth of `ln ratio` per dilation step.
    pub trend: Option<DecayFit>,
    pub pass: bool,
}

pub fn multiplier_bound_check(
    f: &MultiplierFunction<f64>,
    s: f64,
    n: usize,
    dilations: &[i32],
    max_points: usize,
) -> Result<MultiplierCheck> {
    let results: Vec<Result<(i32, NormReport, f64)>> = dilations
        .par_iter()
        .map(|&j| {
            let fj = f.dilate(2f64.powi(j));
            let sob = sobolev_h(&fj, s)?.value;
            let g = fj.clone();
            let times_a = MultiplierFunction::closed("F(x) x", -1.0, 1.0, move |x| g.eval(x) * x);
            let width = fj.support().width();
            let start = if width.is_finite() && width > 0.0 { (32.0 * PI / width).ceil() as usize } else { 256 };
            let ker = adaptive_kernel(n, start, max_points, |grid| functional_calculus(grid, &times_a, Operand::A))?;
            Ok((j, l1_report(&ker), sob))
        })
        .collect();
    let mut rows = Vec::new();
    let mut truncated = Vec::new();
    for r in results {
        let (j, rep, sob) = r?;
        if rep.contaminated {
            truncated.push(j);
            continue;
        }
        let ratio = if sob > 0.0 { rep.upper / sob } else { 0.0 };
        rows.push((j, rep.upper, sob, ratio));
    }
    let live: Vec<&(i32, f64, f64, f64)> = rows.iter().filter(|r| r.3 > 0.0).collect();
    let trend = if live.len() >= 3 {
        let xs: Vec<f64> = live.iter().map(|r| r.0 as f64).collect();
        let ys: Vec<f64> = live.iter().map(|r| r.3).collect();
        Some(fit_semilog(&xs, &ys)?.with_gate(Gate::AtMost { bound: 0.05 }))
    } else {
        None
    };
    let pass = trend.as_ref().map_or(true, |t| t.passed());
    Ok(MultiplierCheck { s, rows, truncated, trend, pass })
}

/// Builds a kernel on successively doubled grids until its tail mass is below
/// tolerance or the next grid would exceed `max_points`; the last kernel is
/// returned either way. The first grid has at least `min_samples` per axis,
/// rounded up to a power of two and capped by the budget.
pub fn adaptive_kernel(
    n: usize,
    min_samples: usize,
    max_points: usize,
    build: impl Fn(GridSpec) -> Result<LatticeKernel<f64>>,
) -> Result<LatticeKernel<f64>> {
    let mut m = min_samples.max(256).next_power_of_two();
    while m > 8 && m.checked_pow(n as u32).map_or(true, |t| t > max_points) {
        m /= 2;
    }
    loop {
        let ker = build(GridSpec::with_budget(n, m, max_points)?)?;
        let next = (2 * m).checked_pow(n as u32).unwrap_or(usize::MAX);
        if ker.tail_mass() <= DEFAULT_TAIL_TOL || next > max_points {
            return Ok(ker);
        }
        m *= 2;
    }
}

/// Boundedness of `t -> ||F(t(I - A))||_{1->1}` over a ladder.
#[derive(Debug, Clone, Serialize)]
pub struct UniformSweep {
    pub rows: Vec<SweepRow>,
    pub truncated: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub max_over_median: f64,
    pub pass: bool,
}

fn summarize(rows: Vec<SweepRow>, truncated: Vec<f64>, slope_bound: f64) -> Result<UniformSweep> {
    let mut vals: Vec<f64> = rows.iter().map(|r| r.upper).collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    let median = if vals.is_empty() { 0.0 } else { vals[vals.len() / 2] };
    let max = vals.last().copied().unwrap_or(0.0);
    let max_over_median = if median > 0.0 { max / median } else if max == 0.0 { 1.0 } else { f64::INFINITY };
    let live: Vec<&SweepRow> = rows.iter().filter(|r| r.upper > 0.0).collect();
    let fit = if live.len() >= 3 {
        let xs: Vec<f64> = live.iter().map(|r| r.parameter).collect();
        let ys: Vec<f64> = live.iter().map(|r| r.upper).collect();
        Some(fit_loglog(&xs, &ys)?.with_gate(Gate::AtMost { bound: slope_bound }))
    } else {
        None
    };
    let pass = truncated.is_empty() && max_over_median <= 3.0 && fit.as_ref().map_or(true, |f| f.passed());
    Ok(UniformSweep { rows, truncated, fit, max_over_median, pass })
}

/// Each ladder point starts on `start` and doubles its grid until the tail
/// mass is below tolerance or `max_points` is reached; points that never fit
/// are reported in `truncated` and fail the sweep.
pub fn uniform_multiplier_sweep(
    f: &MultiplierFunction<f64>,
    start: GridSpec,
    ts: &[f64],
    max_points: usize,
) -> Result<UniformSweep> {
    let n = start.dim();
    let sup = f.support();
    if !sup.inside_open(0.0, 1.0 / n as f64) && sup.width() > 0.0 {
        return Err(Error::SupportViolation { lo: sup.lo, hi: sup.hi, required: format!("(0, {})", 1.0 / n as f64) });
    }
    if ts.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("sweep parameters must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut truncated = Vec::new();
    for &t in ts {
        let ker = adaptive_kernel(n, start.samples(), max_points, |g| functional_calculus(g, f, Operand::ScaledIMinusA(t)))?;
        let rep = l1_report(&ker);
        if rep.contaminated {
            truncated.push(t);
        } else {
            rows.push(SweepRow::from_report(t, &rep));
        }
    }
    summarize(rows, truncated, 0.05)
}

/// `||(1 - (I - A)/R)_+^alpha||_{1->1}` over a ladder of radii, per `alpha`.
///
/// On a fixed torus every such norm is finite, so unboundedness shows up as
/// growth under grid refinement: each radius is evaluated on `M` and `2M`.
#[derive(Debug, Clone, Serialize)]
pub struct BochnerRieszRow {
    pub alpha: f64,
    /// Parameter is `1/R`.
    pub rows: Vec<SweepRow>,
    /// Log-log slope of the norm against `1/R`.
    pub slope: Option<f64>,
    /// Largest ratio of the norm on `2M` to the norm on `M`.
    pub grid_growth: f64,
    /// Norms stay put under refinement and the `1/R` sequence is bounded.
    pub bounded: bool,
}

pub fn bochner_riesz_sweep(grid: GridSpec, alphas: &[f64], radii: &[f64]) -> Result<Vec<BochnerRieszRow>> {
    let n = grid.dim();
    if radii.iter().any(|r| !(*r > 0.0 && *r < 1.0 / n as f64)) {
        return Err(Error::InvalidArgument(format!("radii must lie in (0, {})", 1.0 / n as f64)));
    }
    let fine = GridSpec::with_budget(n, 2 * grid.samples(), usize::MAX)?;
    alphas
        .iter()
        .map(|&alpha| {
            let pairs: Vec<(SweepRow, f64)> = radii
                .par_iter()
                .map(|&r| {
                    let f = bochner_riesz(r, alpha)?;
                    let coarse = l1_report(&functional_calculus(grid, &f, Operand::IMinusA)?);
                    let refined = functional_calculus(fine, &f, Operand::IMinusA)?.l1();
                    let growth = if coarse.upper > 0.0 { refined / coarse.upper } else { 1.0 };
                    Ok((SweepRow::from_report(1.0 / r, &coarse), growth))
                })
                .collect::<Result<_>>()?;
            let grid_growth = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
            let rows: Vec<SweepRow> = pairs.into_iter().map(|p| p.0).collect();
            let xs: Vec<f64> = rows.iter().map(|r| r.parameter).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.upper).collect();
            let slope = if rows.len() >= 2 && ys.iter().all(|y| *y > 0.0) { Some(fit_loglog(&xs, &ys)?.exponent) } else { None };
            let summary = summarize(rows.clone(), Vec::new(), 0.05)?;
            Ok(BochnerRieszRow { alpha, rows, slope, grid_growth, bounded: summary.pass && grid_growth < 1.02 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::walk_power_direct;
    use nalgebra::DMatrix;

    fn circulant(kernel: &LatticeKernel<f64>) -> DMatrix<f64> {
        let m = kernel.grid().samples() as i64;
        DMatrix::from_fn(m as usize, m as usize, |x, y| kernel.at(&[x as i64 - y as i64]).re)
    }

    #[test]
    fn identity_and_walk() {
        let grid = GridSpec::new(1, 64).unwrap();
        let delta = LatticeKernel::<f64>::delta(grid);
        let inf = f64::INFINITY;
        for (p, q) in [(1.0, 1.0), (2.0, 2.0), (inf, inf), (1.0, 2.0), (1.0, inf), (2.0, inf)] {
            let r = conv_norm(&delta, p, q).unwrap();
            assert!(r.exact && (r.upper - 1.0).abs() < 1e-15, "{p} {q}");
        }
        let a = walk_power_direct::<f64>(grid, 1);
        assert_eq!(conv_norm(&a, 1.0, 1.0).unwrap().upper, 1.0);
        assert!((conv_norm(&a, 2.0, 2.0).unwrap().upper - 1.0).abs() < 1e-15);
        assert!(conv_norm(&a, 2.0, 1.0).is_err());
        let zero = LatticeKernel::from_fn(grid, |_| 0.0);
        assert_eq!(conv_norm(&zero, 1.0, 1.0).unwrap().upper, 0.0);
    }

    #[test]
    fn spectral_norm_matches_dense_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in [16usize, 64, 128] {
            let grid = GridSpec::new(1, m).unwrap();
            let taps: Vec<(i64, f64)> = (0..5).map(|_| (rng.random_range(-6..=6), rng.random_range(-1.0..1.0))).collect();
            let ker = LatticeKernel::from_fn(grid, |d| taps.iter().filter(|t| t.0 == d[0]).map(|t| t.1).sum());
            let svd = circulant(&ker).singular_values().max();
            let r = conv_norm(&ker, 2.0, 2.0).unwrap();
            assert!((r.upper - svd).abs() < 1e-10, "{} vs {svd}", r.upper);
            assert_eq!(conv_norm(&ker, 1.0, 1.0).unwrap().upper, conv_norm(&ker, f64::INFINITY, f64::INFINITY).unwrap().upper);
        }
    }

    #[test]
    fn probes_reach_exact_values() {
        let grid = GridSpec::new(1, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let taps: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ker = LatticeKernel::from_fn(grid, |d| if d[0].abs() <= 4 { taps[(d[0] + 4) as usize] } else { 0.0 });
        let inf = f64::INFINITY;
        for (p, q) in [(1.0, 1.0), (2.0, 2.0), (inf, inf), (1.0, 2.0), (1.0, inf), (2.0, inf)] {
            let exact = conv_norm(&ker, p, q).unwrap().upper;
            let probe = probe_lower_bound(&ker, p, q, 1);
            assert!(probe >= 0.9 * exact && probe <= exact * (1.0 + 1e-9), "({p},{q}): {probe} vs {exact}");
        }
    }

    #[test]
    fn interpolated_pairs_are_sandwiched() {
        let grid = GridSpec::new(1, 64).unwrap();
        let ker = walk_power_direct::<f64>(grid, 6);
        for (p, q) in [(1.5, 1.5), (1.0, 1.5), (1.2, 3.0), (3.0, 3.0), (4.0, f64::INFINITY)] {
            let r = conv_norm(&ker, p, q).unwrap();
            assert!(!r.exact);
            assert!(r.lower <= r.upper && r.lower > 0.0, "{r:?}");
        }
        // a stochastic kernel has norm 1 on every L^p
        let r = conv_norm(&ker, 1.5, 1.5).unwrap();
        assert!((r.upper - 1.0).abs() < 1e-12 && r.lower > 0.95);
    }

    #[test]
    fn wave_growth_on_the_line() {
        let ts: Vec<f64> = (0..7).map(|j| 2f64.powi(j)).collect();
        let g = wave_growth_fit(GridSpec::new(1, 4096).unwrap(), &ts).unwrap();
        assert!(g.truncated.is_empty());
        assert!(g.fit.passed(), "{}", g.fit.exponent);
        let zero = wave_growth_fit(GridSpec::new(1, 256).unwrap(), &[0.0, 1.0, 2.0]).unwrap();
        assert!((zero.rows[0].upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_multiplier_ratios_do_not_grow() {
        let f = MultiplierFunction::bump(0.25, 0.75);
        let js: Vec<i32> = (0..10).collect();
        let rep = multiplier_bound_check(&f, 1.1, 1, &js, 1 << 23).unwrap();
        assert!(rep.truncated.is_empty(), "{:?}", rep.truncated);
        assert!(rep.rows.len() == 10 && rep.rows.iter().all(|r| r.1 > 0.0), "{:?}", rep.rows);
        assert!(rep.pass, "{:?}", rep.trend);
        let zero = multiplier_bound_check(&MultiplierFunction::zero(), 1.1, 1, &[0, 1], 1 << 12).unwrap();
        assert!(zero.rows.iter().all(|r| r.3 == 0.0));
    }

    #[test]
    fn uniform_sweep_checks_support() {
        let grid = GridSpec::new(2, 64).unwrap();
        let bad = MultiplierFunction::bump(0.1, 0.6);
        assert!(uniform_multiplier_sweep(&bad, grid, &[1.0, 2.0], 1 << 12).is_err());
        let zero = uniform_multiplier_sweep(&MultiplierFunction::zero(), grid, &[1.0, 10.0], 1 << 12).unwrap();
        assert!(zero.rows.iter().all(|r| r.upper == 0.0) && zero.pass);
    }

    #[test]
    fn bochner_riesz_directions() {
        let grid = GridSpec::new(1, 2048).unwrap();
        let radii = [0.4, 0.2, 0.1, 0.05];
        let rows = bochner_riesz_sweep(grid, &[10.0, 0.0], &radii).unwrap();
        assert!(rows[0].bounded, "{:?}", rows[0]);
        assert!(rows[0].rows.iter().all(|r| (r.upper - 1.0).abs() < 0.2));
        assert!(!rows[1].bounded && rows[1].grid_growth > 1.02);
        assert!(bochner_riesz_sweep(grid, &[1.0], &[1.5]).is_err());
        let plane = bochner_riesz_sweep(GridSpec::new(2, 128).unwrap(), &[0.0], &[0.2, 0.1]).unwrap();
        assert!(plane[0].grid_growth > 1.2, "{}", plane[0].grid_growth);
    }

    #[test]
    fn sweep_csv_has_header() {
        let rows = vec![SweepRow { parameter: 1.0, lower: 0.5, upper: 0.75, exact: true, contaminated: false }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "parameter,lower,upper,exact\n1.0,0.5,0.75,true\n");
    }
}
