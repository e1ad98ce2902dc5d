//! FFT functional calculus for the simple random walk on the periodic lattice `Z_M^n`.
//!
//! Conventions: a kernel `k(d)` acts by convolution `Tf = f * k`; its symbol is
//! `m(theta) = sum_d k(d) e^{i<d,theta>}` sampled at `theta_j = 2 pi m_j / M`, so the
//! walk `A` has symbol `G(theta) = (1/n) sum_j cos(theta_j)`.

use num_complex::Complex;
use serde::Serialize;

use crate::fft;
use crate::multiplier::MultiplierFunction;
use crate::{Error, Real, Result};

/// Tail-mass tolerance below which a torus kernel is accepted as a kernel on `Z^n`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;
/// Largest `M^n` accepted by [`GridSpec::new`].
pub const DEFAULT_MAX_POINTS: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct GridSpec {
    n: usize,
    m: usize,
}

impl GridSpec {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        Self::with_budget(n, m, DEFAULT_MAX_POINTS)
    }

    pub fn with_budget(n: usize, m: usize, max_points: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if m < 8 || m % 2 != 0 {
            return Err(Error::InvalidGrid(format!("M = {m} must be even and >= 8")));
        }
        let total = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if total > max_points as u128 {
            return Err(Error::InvalidGrid(format!(
                "M^n = {m}^{n} exceeds the memory budget of {max_points} points"
            )));
        }
        Ok(GridSpec { n, m })
    }

    /// Desk-scale default: `M = 4096, 512, 64` for `n = 1, 2, 3`.
    pub fn default_for(n: usize) -> Result<Self> {
        let m = match n {
            1 => 4096,
            2 => 512,
            3 => 64,
            _ => return Err(Error::InvalidGrid(format!("no default grid for n = {n}"))),
        };
        Self::new(n, m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid indices `m_j` of a linear index (axis 0 slowest).
    pub fn indices(&self, mut idx: usize, out: &mut [usize]) {
        for j in (0..self.n).rev() {
            out[j] = idx % self.m;
            idx /= self.m;
        }
    }

    /// Representative of `m_j` in the centered range `-M/2 .. M/2 - 1`.
    pub fn centered(&self, mj: usize) -> i64 {
        let half = self.m / 2;
        if mj < half {
            mj as i64
        } else {
            mj as i64 - self.m as i64
        }
    }

    /// Centered lattice coordinates of a linear index.
    pub fn point(&self, idx: usize) -> Vec<i64> {
        let mut ms = vec![0; self.n];
        self.indices(idx, &mut ms);
        ms.into_iter().map(|v| self.centered(v)).collect()
    }

    /// Linear index of a lattice point, reduced modulo `M` in each coordinate.
    pub fn index_of(&self, d: &[i64]) -> usize {
        let m = self.m as i64;
        d.iter().fold(0usize, |acc, &dj| acc * self.m + dj.rem_euclid(m) as usize)
    }

    pub fn theta<T: Real>(&self, mj: usize) -> T {
        T::of(2.0 * std::f64::consts::PI * mj as f64 / self.m as f64)
    }

    /// Largest centered coordinate magnitude `max_j |d_j|` of a linear index.
    pub fn sup_radius(&self, idx: usize) -> usize {
        let mut idx = idx;
        let mut r = 0usize;
        for _ in 0..self.n {
            let mj = idx % self.m;
            idx /= self.m;
            r = r.max(self.centered(mj).unsigned_abs() as usize);
        }
        r
    }
}

/// Samples of a multiplier symbol on the torus grid.
#[derive(Debug, Clone)]
pub struct TorusSymbol<T> {
    grid: GridSpec,
    values: Vec<Complex<T>>,
    /// Invariant under `theta_j -> -theta_j` and coordinate permutations.
    symmetric: bool,
}

impl<T: Real> TorusSymbol<T> {
    /// General symbol from a function of the angle vector.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[T]) -> Complex<T>) -> Self {
        let mut ms = vec![0usize; grid.n];
        let mut th = vec![T::zero(); grid.n];
        let values = (0..grid.len())
            .map(|idx| {
                grid.indices(idx, &mut ms);
                for (t, &mj) in th.iter_mut().zip(&ms) {
                    *t = grid.theta(mj);
                }
                f(&th)
            })
            .collect();
        TorusSymbol { grid, values, symmetric: false }
    }

    /// Symbol `h(G(theta))`; inherits the hyperoctahedral symmetry of `G`.
    pub fn from_g(grid: GridSpec, h: impl Fn(T) -> Complex<T>) -> Self {
        let cos: Vec<T> = (0..grid.m).map(|mj| grid.theta::<T>(mj).cos()).collect();
        let inv_n = T::one() / T::of_usize(grid.n);
        let mut ms = vec![0usize; grid.n];
        let values = (0..grid.len())
            .map(|idx| {
                grid.indices(idx, &mut ms);
                let g = ms.iter().map(|&mj| cos[mj]).sum::<T>() * inv_n;
                h(g)
            })
            .collect();
        TorusSymbol { grid, values, symmetric: true }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "symbol has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(TorusSymbol { grid, values, symmetric: false })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn at(&self, ms: &[usize]) -> Complex<T> {
        let idx = ms.iter().fold(0usize, |acc, &v| acc * self.grid.m + v);
        self.values[idx]
    }

    pub fn sup_abs(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == T::zero())
    }

    /// Inverse transform: `k(d) = M^{-n} sum_theta m(theta) e^{-i<d,theta>}`.
    pub fn to_kernel(&self) -> LatticeKernel<T> {
        let mut values = self.values.clone();
        fft::forward(&mut values, self.grid.n, self.grid.m);
        let scale = T::one() / T::of_usize(self.grid.len());
        for v in values.iter_mut() {
            *v = *v * scale;
        }
        if self.symmetric {
            symmetrize(&self.grid, &mut values);
            if self.is_real() {
                for v in values.iter_mut() {
                    v.im = T::zero();
                }
            }
        }
        let floor = T::epsilon() * T::of(64.0) * self.sup_abs();
        LatticeKernel::with_floor(self.grid, values, floor)
    }
}

/// Averages each orbit of the hyperoctahedral group (sign flips and coordinate
/// permutations) so symmetric symbols produce exactly symmetric kernels.
fn symmetrize<T: Real>(grid: &GridSpec, values: &mut [Complex<T>]) {
    let n = grid.n;
    let m = grid.m;
    let mut sums = vec![Complex::new(T::zero(), T::zero()); values.len()];
    let mut counts = vec![0u32; values.len()];
    let mut canon = vec![0usize; values.len()];
    let mut ms = vec![0usize; n];
    for idx in 0..values.len() {
        grid.indices(idx, &mut ms);
        for v in ms.iter_mut() {
            *v = (*v).min(m - *v);
        }
        ms.sort_unstable();
        let key = ms.iter().fold(0usize, |acc, &v| acc * m + v);
        canon[idx] = key;
        sums[key] = sums[key] + values[idx];
        counts[key] += 1;
    }
    for idx in 0..values.len() {
        let key = canon[idx];
        values[idx] = sums[key] / T::of(counts[key] as f64);
    }
}

/// Convolution kernel on `Z_M^n`, stored densely by grid index.
#[derive(Debug, Clone)]
pub struct LatticeKernel<T> {
    grid: GridSpec,
    values: Vec<Complex<T>>,
    /// `l^1` mass in the outer half of the fundamental domain (`max_j |d_j| >= M/4`),
    /// counting only values above the accuracy floor.
    tail_mass: T,
    /// Absolute accuracy floor of the stored values (transform round-off).
    floor: T,
}

impl<T: Real> LatticeKernel<T> {
    pub fn from_values(grid: GridSpec, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "kernel has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self::with_floor(grid, values, T::zero()))
    }

    pub(crate) fn with_floor(grid: GridSpec, values: Vec<Complex<T>>, floor: T) -> Self {
        let quarter = grid.m / 4;
        let tail_mass = values
            .iter()
            .enumerate()
            .filter(|(idx, _)| grid.sup_radius(*idx) >= quarter)
            .map(|(_, v)| v.norm())
            .filter(|&a| a > floor)
            .sum();
        LatticeKernel { grid, values, tail_mass, floor }
    }

    /// Real kernel from a function of the centered lattice point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[i64]) -> T) -> Self {
        let values = (0..grid.len())
            .map(|idx| Complex::new(f(&grid.point(idx)), T::zero()))
            .collect();
        Self::with_floor(grid, values, T::zero())
    }

    pub fn delta(grid: GridSpec) -> Self {
        let mut values = vec![Complex::new(T::zero(), T::zero()); grid.len()];
        values[0] = Complex::new(T::one(), T::zero());
        Self::with_floor(grid, values, T::zero())
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn tail_mass(&self) -> T {
        self.tail_mass
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    pub fn at(&self, d: &[i64]) -> Complex<T> {
        self.values[self.grid.index_of(d)]
    }

    /// Forward transform back to the torus.
    pub fn to_symbol(&self) -> TorusSymbol<T> {
        let mut values = self.values.clone();
        fft::inverse(&mut values, self.grid.n, self.grid.m);
        TorusSymbol { grid: self.grid, values, symmetric: false }
    }

    pub fn l1(&self) -> T {
        self.values.iter().map(|v| v.norm()).sum()
    }

    pub fn l2(&self) -> T {
        self.values.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn linf(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    pub fn sum(&self) -> Complex<T> {
        self.values.iter().fold(Complex::new(T::zero(), T::zero()), |a, &b| a + b)
    }

    /// `self * other` on the torus, via the product of symbols.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("kernels live on different grids".into()));
        }
        let a = self.to_symbol();
        let b = other.to_symbol();
        let values = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
        let prod = TorusSymbol { grid: self.grid, values, symmetric: false };
        let mut k = prod.to_kernel();
        k.floor = k.floor.max(self.floor * other.l1() + other.floor * self.l1());
        Ok(k)
    }

    /// Fails with [`Error::TruncationAliasing`] when the tail mass exceeds `tol`.
    pub fn check_tail(&self, tol: f64) -> Result<()> {
        let tail = self.tail_mass.as_f64();
        if tail > tol {
            Err(Error::TruncationAliasing { tail, tol })
        } else {
            Ok(())
        }
    }

    /// `(centered point, value)` pairs in grid order.
    pub fn iter_points(&self) -> impl Iterator<Item = (Vec<i64>, Complex<T>)> + '_ {
        self.values.iter().enumerate().map(move |(idx, v)| (self.grid.point(idx), *v))
    }

    /// CSV `d_1..d_n,re,im` in grid order, optionally restricted to `max_j |d_j| <= window`.
    pub fn write_csv<W: std::io::Write>(&self, out: W, window: Option<usize>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.grid.n).map(|j| format!("d_{j}")).collect();
        header.extend(["re".to_string(), "im".to_string()]);
        w.write_record(&header)?;
        for (idx, v) in self.values.iter().enumerate() {
            if window.is_some_and(|r| self.grid.sup_radius(idx) > r) {
                continue;
            }
            let mut rec: Vec<String> = self.grid.point(idx).iter().map(|d| d.to_string()).collect();
            rec.push(format!("{:?}", v.re));
            rec.push(format!("{:?}", v.im));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `G(theta) = (1/n) sum_j cos(theta_j)` on the grid.
pub fn symbol_g<T: Real>(grid: GridSpec) -> TorusSymbol<T> {
    TorusSymbol::from_g(grid, |g| Complex::new(g, T::zero()))
}

/// Exact neighbour average `Af(d) = (1/2n) sum_i sum_{+-} f(d +- e_i)` on the torus.
pub fn apply_walk<T: Real>(f: &LatticeKernel<T>) -> LatticeKernel<T> {
    let grid = f.grid;
    let (n, m) = (grid.n, grid.m);
    let w = T::one() / T::of_usize(2 * n);
    let mut out = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex::new(T::zero(), T::zero());
        for axis in 0..n {
            let stride = m.pow((n - 1 - axis) as u32);
            let mj = (idx / stride) % m;
            let up = if mj + 1 == m { idx + stride - m * stride } else { idx + stride };
            let down = if mj == 0 { idx + (m - 1) * stride } else { idx - stride };
            acc = acc + f.values[up] + f.values[down];
        }
        *slot = acc * w;
    }
    LatticeKernel::with_floor(grid, out, f.floor)
}

/// Kernel of `A^k`, the inverse transform of `G^k`.
pub fn walk_power_kernel<T: Real>(grid: GridSpec, k: u32) -> Result<LatticeKernel<T>> {
    walk_power_kernel_with_tol(grid, k, DEFAULT_TAIL_TOL)
}

pub fn walk_power_kernel_with_tol<T: Real>(
    grid: GridSpec,
    k: u32,
    tail_tol: f64,
) -> Result<LatticeKernel<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("walk power k must be >= 1".into()));
    }
    let kernel = TorusSymbol::from_g(grid, |g: T| Complex::new(g.powi(k as i32), T::zero())).to_kernel();
    kernel.check_tail(tail_tol)?;
    Ok(kernel)
}

/// Kernel of `A^k` by `k` exact neighbour averages of `delta_0`; no transform
/// round-off, so values far below the FFT floor stay accurate.
pub fn walk_power_direct<T: Real>(grid: GridSpec, k: u32) -> LatticeKernel<T> {
    let mut f = LatticeKernel::delta(grid);
    for _ in 0..k {
        f = apply_walk(&f);
    }
    f
}

/// The operator a multiplier is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Operand<T> {
    /// `F(A)`, spectrum `[-1, 1]`.
    A,
    /// `F(I - A)`, spectrum `[0, 2]`.
    IMinusA,
    /// `F(t (I - A))`.
    ScaledIMinusA(T),
}

impl<T: Real> Operand<T> {
    fn spectral_value(&self, g: T) -> T {
        match *self {
            Operand::A => g,
            Operand::IMinusA => T::one() - g,
            Operand::ScaledIMinusA(t) => t * (T::one() - g),
        }
    }
}

/// Kernel of `F(A)` (or `F(I - A)`, `F(t(I - A))`) on the periodic grid.
pub fn functional_calculus<T: Real>(
    grid: GridSpec,
    f: &MultiplierFunction<T>,
    of: Operand<T>,
) -> Result<LatticeKernel<T>> {
    let symbol = TorusSymbol::from_g(grid, |g| Complex::new(f.eval(of.spectral_value(g)), T::zero()));
    if let Some(bad) = symbol.values.iter().position(|v| !v.re.is_finite()) {
        let mut ms = vec![0; grid.n];
        grid.indices(bad, &mut ms);
        let g = ms.iter().map(|&mj| grid.theta::<T>(mj).cos()).sum::<T>() / T::of_usize(grid.n);
        return Err(Error::UnboundedMultiplier { at: of.spectral_value(g).as_f64() });
    }
    Ok(symbol.to_kernel())
}

/// Kernel of `e^{itA} A`, the inverse transform of `e^{itG} G`.
pub fn wave_kernel<T: Real>(grid: GridSpec, t: T) -> LatticeKernel<T> {
    TorusSymbol::from_g(grid, |g| Complex::new(T::zero(), t * g).exp() * g).to_kernel()
}

/// Symbol of `e^{itA}` alone (modulus one).
pub fn wave_symbol<T: Real>(grid: GridSpec, t: T) -> TorusSymbol<T> {
    TorusSymbol::from_g(grid, |g| Complex::new(T::zero(), t * g).exp())
}
