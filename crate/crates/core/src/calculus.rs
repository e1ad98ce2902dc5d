//! Function-side tools: Sobolev norms of multipliers, dyadic Littlewood-Paley
//! pieces, Bochner-Riesz profiles, amalgam norms, near/far operator splitting
//! and the commutator identities used in weighted estimates.

use std::io;

use nalgebra::{ComplexField, DMatrix, Scalar};
use num_complex::Complex;
use num_traits::{Float, One, Zero};
use serde::Serialize;

use crate::fft;
use crate::multiplier::MultiplierFunction;
use crate::space::{MetricModel, Partition};
use crate::{Error, Real, Result};

/// Sampling rule for transforms of multipliers on the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineSampling {
    /// Length of the periodic window in units of the support width.
    pub extension: f64,
    pub samples: usize,
}

impl Default for LineSampling {
    fn default() -> Self {
        LineSampling { extension: 8.0, samples: 1 << 14 }
    }
}

/// Uniform samples of `F` on a window centred on its support, with angular frequencies.
struct LineSamples<T> {
    xs: Vec<T>,
    step: T,
    freqs: Vec<T>,
    spectrum: Vec<Complex<T>>,
}

fn sample_line<T: Real>(f: &MultiplierFunction<T>, rule: &LineSampling) -> Result<LineSamples<T>> {
    let sup = f.support();
    if !sup.is_bounded() {
        return Err(Error::SupportViolation {
            lo: sup.lo.as_f64(),
            hi: sup.hi.as_f64(),
            required: "a bounded support".into(),
        });
    }
    if rule.samples < 16 || rule.extension < 1.0 {
        return Err(Error::InvalidArgument("sampling needs >= 16 samples and extension >= 1".into()));
    }
    let width = if sup.width() > T::zero() { sup.width() } else { T::one() };
    let len = width * T::of(rule.extension);
    let n = rule.samples;
    let step = len / T::of_usize(n);
    let start = (sup.lo + sup.hi) / T::of(2.0) - len / T::of(2.0);
    let xs: Vec<T> = (0..n).map(|j| start + step * T::of_usize(j)).collect();
    let mut spectrum: Vec<Complex<T>> = xs.iter().map(|&x| Complex::new(f.eval(x), T::zero())).collect();
    fft::forward(&mut spectrum, 1, n);
    let freqs = (0..n)
        .map(|k| {
            let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            T::of(2.0 * std::f64::consts::PI * signed) / len
        })
        .collect();
    Ok(LineSamples { xs, step, freqs, spectrum })
}

/// A Sobolev-type norm together with its aliasing diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevNorm<T> {
    pub value: T,
    /// Share of the weighted spectrum (in norm) carried by the outer half of the frequencies.
    pub tail_fraction: T,
    /// `tail_fraction > 1%`: the sampling does not resolve `F`.
    pub aliased: bool,
}

fn bessel_weights<T: Real>(freqs: &[T], s: T) -> Vec<T> {
    freqs.iter().map(|&xi| (T::one() + xi * xi).powf(s / T::of(2.0))).collect()
}

fn tail_share<T: Real>(weighted: &[Complex<T>]) -> T {
    let n = weighted.len();
    let (mut outer, mut total) = (T::zero(), T::zero());
    for (k, v) in weighted.iter().enumerate() {
        let e = v.norm_sqr();
        total = total + e;
        if k > n / 4 && k < n - n / 4 {
            outer = outer + e;
        }
    }
    if total > T::zero() {
        (outer / total).sqrt()
    } else {
        T::zero()
    }
}

/// `||(I - d^2/dx^2)^{s/2} F||_2` through the discrete Fourier transform.
pub fn sobolev_h<T: Real>(f: &MultiplierFunction<T>, s: T) -> Result<SobolevNorm<T>> {
    sobolev_h_with(f, s, &LineSampling::default())
}

pub fn sobolev_h_with<T: Real>(f: &MultiplierFunction<T>, s: T, rule: &LineSampling) -> Result<SobolevNorm<T>> {
    if !(s >= T::zero()) {
        return Err(Error::InvalidArgument(format!("Sobolev index must be >= 0, got {s}")));
    }
    let line = sample_line(f, rule)?;
    let w = bessel_weights(&line.freqs, s);
    let weighted: Vec<Complex<T>> = line.spectrum.iter().zip(&w).map(|(v, &w)| *v * w).collect();
    let energy: T = weighted.iter().map(|v| v.norm_sqr()).sum();
    let n = T::of_usize(line.xs.len());
    let tail_fraction = tail_share(&weighted);
    Ok(SobolevNorm {
        value: (energy * line.step / n).sqrt(),
        tail_fraction,
        aliased: tail_fraction > T::of(0.01),
    })
}

/// `||(I - d^2/dx^2)^{s/2} F||_q`, with `q = inf` allowed.
pub fn sobolev_w<T: Real>(f: &MultiplierFunction<T>, s: T, q: T) -> Result<SobolevNorm<T>> {
    sobolev_w_with(f, s, q, &LineSampling::default())
}

pub fn sobolev_w_with<T: Real>(
    f: &MultiplierFunction<T>,
    s: T,
    q: T,
    rule: &LineSampling,
) -> Result<SobolevNorm<T>> {
    if !(s >= T::zero()) || !(q >= T::one()) {
        return Err(Error::InvalidArgument(format!("need s >= 0 and q >= 1, got s={s}, q={q}")));
    }
    let line = sample_line(f, rule)?;
    let w = bessel_weights(&line.freqs, s);
    let mut g: Vec<Complex<T>> = line.spectrum.iter().zip(&w).map(|(v, &w)| *v * w).collect();
    let tail_fraction = tail_share(&g);
    let n = g.len();
    fft::inverse(&mut g, 1, n);
    let scale = T::of_usize(n);
    let value = lq_norm(g.iter().map(|v| v.re / scale), q, line.step);
    Ok(SobolevNorm { value, tail_fraction, aliased: tail_fraction > T::of(0.01) })
}

fn lq_norm<T: Real>(vals: impl Iterator<Item = T>, q: T, step: T) -> T {
    if q.is_infinite() {
        return vals.fold(T::zero(), |m, v| m.max(Float::abs(v)));
    }
    (vals.map(|v| Float::abs(v).powf(q)).sum::<T>() * step).powf(T::one() / q)
}

/// `exp(-1/x)`-based smooth step: 0 for `x <= 0`, 1 for `x >= 1`.
pub fn smooth_step<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let a = (-T::one() / x).exp();
    let b = (-T::one() / (T::one() - x)).exp();
    a / (a + b)
}

/// Low-pass cutoff: 1 on `|xi| <= 1/2`, 0 on `|xi| >= 1`. This is `phi_0`.
pub fn low_cutoff<T: Real>(xi: T) -> T {
    T::one() - smooth_step(T::of(2.0) * Float::abs(xi) - T::one())
}

/// Dyadic bump `phi(xi) = chi(xi) - chi(2 xi)`, supported in `1/4 <= |xi| <= 1`;
/// the sum `phi_0 + sum_{l=1}^{L} phi(2^{-l} .)` telescopes to `chi(2^{-L} .)`.
pub fn dyadic_bump<T: Real>(xi: T) -> T {
    low_cutoff(xi) - low_cutoff(T::of(2.0) * xi)
}

/// Littlewood-Paley pieces `F^(0), ..., F^(L)` of a multiplier on a uniform grid.
#[derive(Debug, Clone, Serialize)]
pub struct DyadicDecomposition<T> {
    pub level: usize,
    pub xs: Vec<T>,
    pub samples: Vec<T>,
    pub pieces: Vec<Vec<T>>,
    /// `max |F - sum of pieces|` on the grid.
    pub residual: T,
    pub tolerance: T,
    /// The residual exceeds the tolerance: `L` is too small for this `F`.
    pub flagged: bool,
}

impl<T: Real> DyadicDecomposition<T> {
    /// Frequency band `[2^{l-2}, 2^l]` of piece `l >= 1` (`[0, 1]` for `l = 0`).
    pub fn band(level: usize) -> (f64, f64) {
        if level == 0 {
            (0.0, 1.0)
        } else {
            (2f64.powi(level as i32 - 2), 2f64.powi(level as i32))
        }
    }

    /// CSV rows `(l, lambda, value)`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "lambda", "value"])?;
        for (l, piece) in self.pieces.iter().enumerate() {
            for (x, v) in self.xs.iter().zip(piece) {
                w.write_record([l.to_string(), format!("{x:?}"), format!("{v:?}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn dyadic_pieces<T: Real>(f: &MultiplierFunction<T>, level: usize) -> Result<DyadicDecomposition<T>> {
    dyadic_pieces_with(f, level, &LineSampling::default(), T::of(1e-8))
}

pub fn dyadic_pieces_with<T: Real>(
    f: &MultiplierFunction<T>,
    level: usize,
    rule: &LineSampling,
    tolerance: T,
) -> Result<DyadicDecomposition<T>> {
    let line = sample_line(f, rule)?;
    let n = line.xs.len();
    let scale = T::of_usize(n);
    let samples: Vec<T> = line.xs.iter().map(|&x| f.eval(x)).collect();
    let mut pieces = Vec::with_capacity(level + 1);
    for l in 0..=level {
        let dil = T::of(2f64.powi(-(l as i32)));
        let mut spec: Vec<Complex<T>> = line
            .spectrum
            .iter()
            .zip(&line.freqs)
            .map(|(v, &xi)| *v * if l == 0 { low_cutoff(xi) } else { dyadic_bump(dil * xi) })
            .collect();
        fft::inverse(&mut spec, 1, n);
        pieces.push(spec.iter().map(|v| v.re / scale).collect::<Vec<T>>());
    }
    let residual = (0..n)
        .map(|j| Float::abs(samples[j] - pieces.iter().map(|p| p[j]).sum::<T>()))
        .fold(T::zero(), T::max);
    Ok(DyadicDecomposition {
        level,
        xs: line.xs,
        samples,
        pieces,
        residual,
        tolerance,
        flagged: residual > tolerance,
    })
}

/// `lambda -> (1 - lambda/R)_+^alpha`; `alpha = 0` is the indicator of `lambda < R`.
pub fn bochner_riesz<T: Real>(r: T, alpha: T) -> Result<MultiplierFunction<T>> {
    if !(r > T::zero()) || !(alpha >= T::zero()) {
        return Err(Error::InvalidArgument(format!("need R > 0 and alpha >= 0, got R={r}, alpha={alpha}")));
    }
    Ok(MultiplierFunction::closed(format!("bochner_riesz(R={r},alpha={alpha})"), T::neg_infinity(), r, move |x| {
        if x >= r {
            T::zero()
        } else if alpha == T::zero() {
            T::one()
        } else {
            (T::one() - x / r).powf(alpha)
        }
    }))
}

/// `(sum_l ||f 1_{Q_l}||_q^p)^{1/p}` over the cells of a partition; `p` or `q` may be infinite.
pub fn amalgam_norm<T: Real>(f: &[T], part: &Partition, p: f64, q: f64) -> Result<T> {
    if !(p >= 1.0) || !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("amalgam exponents must be >= 1, got p={p}, q={q}")));
    }
    if f.len() != part.cell_of.len() {
        return Err(Error::InvalidArgument("function length differs from the point count".into()));
    }
    let local: Vec<T> = part
        .cells
        .iter()
        .map(|cell| lq_norm(cell.iter().map(|&x| f[x]), T::of(q), T::one()))
        .collect();
    Ok(lq_norm(local.into_iter(), T::of(p), T::one()))
}

/// Splits a matrix into the blocks `P_{Q_j} T P_{Q_i}` with `d(x_i, x_j) <= 5r`
/// and the remainder. The two parts add up to `T` entrywise.
pub fn diag_split<N: Scalar + Zero>(
    t: &DMatrix<N>,
    model: &MetricModel,
    part: &Partition,
    r: f64,
) -> Result<(DMatrix<N>, DMatrix<N>)> {
    let size = part.cell_of.len();
    if t.nrows() != size || t.ncols() != size {
        return Err(Error::InvalidArgument(format!(
            "operator is {}x{}, partition has {size} points",
            t.nrows(),
            t.ncols()
        )));
    }
    let k = part.len();
    let near_cells = DMatrix::from_fn(k, k, |i, j| part.center_dist(model, i, j) <= 5.0 * r);
    let mut near = DMatrix::zeros(size, size);
    let mut far = DMatrix::zeros(size, size);
    for y in 0..size {
        for x in 0..size {
            let slot = if near_cells[(part.cell_of[x], part.cell_of[y])] { &mut near } else { &mut far };
            slot[(x, y)] = t[(x, y)].clone();
        }
    }
    Ok((near, far))
}

/// `ad^k(T)` with `ad(T) = eta T - T eta` for the diagonal weight `eta`.
pub fn multi_commutator<N: ComplexField>(t: &DMatrix<N>, eta: &[N::RealField], k: usize) -> DMatrix<N> {
    let mut cur = t.clone();
    for _ in 0..k {
        cur = DMatrix::from_fn(cur.nrows(), cur.ncols(), |x, y| {
            cur[(x, y)].clone() * N::from_real(eta[x].clone() - eta[y].clone())
        });
    }
    cur
}

/// Coefficients `Gamma(kappa, m)`, `0 <= m <= kappa`, from `Gamma(kappa, 0) = 1` and
/// `Gamma(kappa, m + 1) = sum_{l=m}^{kappa-1} Gamma(l, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTable<I> {
    kappa: usize,
    rows: Vec<Vec<I>>,
}

impl<I: Clone + Zero + One> GammaTable<I> {
    pub fn new(kappa: usize) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::InvalidArgument("gamma table needs kappa >= 1".into()));
        }
        let mut rows: Vec<Vec<I>> = Vec::with_capacity(kappa + 1);
        for k in 0..=kappa {
            let mut row = vec![I::one()];
            for m in 0..k {
                let mut acc = I::zero();
                for prev in rows.iter().take(k).skip(m) {
                    acc = acc + prev[m].clone();
                }
                row.push(acc);
            }
            rows.push(row);
        }
        Ok(GammaTable { kappa, rows })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn get(&self, k: usize, m: usize) -> &I {
        &self.rows[k][m]
    }

    pub fn row(&self, k: usize) -> &[I] {
        &self.rows[k]
    }
}

impl<I: Clone + Zero + One + PartialEq> GammaTable<I> {
    /// Re-checks the defining recursion on every entry.
    pub fn satisfies_recursion(&self) -> bool {
        (0..=self.kappa).all(|k| {
            self.rows[k][0] == I::one()
                && (0..k).all(|m| {
                    let sum = (m..k).fold(I::zero(), |acc, l| acc + self.rows[l][m].clone());
                    sum == self.rows[k][m + 1]
                })
        })
    }
}

pub fn gamma_table(kappa: usize) -> Result<GammaTable<u64>> {
    GammaTable::new(kappa)
}

/// Frobenius norm of `eta^kappa T - sum_m Gamma(kappa, m) ad^m(T) eta^{kappa-m}`.
pub fn commutator_identity_check(t: &DMatrix<f64>, eta: &[f64], kappa: usize) -> Result<f64> {
    if kappa > 6 {
        return Err(Error::InvalidArgument(format!("kappa = {kappa} exceeds 6")));
    }
    if t.nrows() != eta.len() || t.ncols() != eta.len() {
        return Err(Error::InvalidArgument("weight length differs from the matrix size".into()));
    }
    let table = gamma_table(kappa.max(1))?;
    let e = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(eta));
    let lhs = pow(&e, kappa) * t;
    let mut rhs = DMatrix::zeros(t.nrows(), t.ncols());
    for m in 0..=kappa {
        rhs += multi_commutator(t, eta, m) * pow(&e, kappa - m) * *table.get(kappa, m) as f64;
    }
    Ok((lhs - rhs).norm())
}

fn pow(e: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(e.nrows(), e.ncols());
    for _ in 0..k {
        out = &out * e;
    }
    out
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order.max(1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Operator-norm residual of `[eta, e^{itT}] = it int_0^1 e^{istT} [eta, T] e^{i(1-s)tT} ds`
/// with Gauss-Legendre quadrature of the given order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DuhamelReport {
    pub residual: f64,
    /// Operator norm of the left-hand side, for scale.
    pub commutator_norm: f64,
    pub order: usize,
}

pub fn duhamel_check(t: &DMatrix<Complex<f64>>, eta: &[f64], time: f64, order: usize) -> Result<DuhamelReport> {
    let n = t.nrows();
    if t.ncols() != n || eta.len() != n {
        return Err(Error::InvalidArgument("operator must be square and match the weight length".into()));
    }
    let herm_gap = (t - t.adjoint()).norm();
    if herm_gap > 1e-12 * t.norm().max(1.0) {
        return Err(Error::InvalidArgument(format!("operator is not Hermitian (gap {herm_gap:e})")));
    }
    let eig = t.clone().symmetric_eigen();
    let u = eig.eigenvectors;
    let lam = eig.eigenvalues;
    let i = Complex::new(0.0, 1.0);
    let to_eigen = |m: &DMatrix<Complex<f64>>| u.adjoint() * m * &u;
    let from_eigen = |m: &DMatrix<Complex<f64>>| &u * m * u.adjoint();
    let phase = |s: f64, a: usize| (i * (s * time * lam[a])).exp();

    let eta_m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, eta.iter().map(|&v| Complex::new(v, 0.0))));
    let e_t = from_eigen(&DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |a, _| phase(1.0, a))));
    let lhs = &eta_m * &e_t - &e_t * &eta_m;

    let comm = to_eigen(&(&eta_m * t - t * &eta_m));
    let (nodes, weights) = gauss_legendre(order);
    let mut integral = DMatrix::<Complex<f64>>::zeros(n, n);
    for (x, w) in nodes.iter().zip(&weights) {
        let s = 0.5 * (x + 1.0);
        for b in 0..n {
            for a in 0..n {
                integral[(a, b)] += comm[(a, b)] * phase(s, a) * phase(1.0 - s, b) * (0.5 * w);
            }
        }
    }
    let rhs = from_eigen(&integral) * (i * time);
    Ok(DuhamelReport {
        residual: (lhs.clone() - rhs).singular_values().max(),
        commutator_norm: lhs.singular_values().max(),
        order,
    })
}
