//! Level surfaces `{G = lambda}` of the walk symbol on `T^n`, the spectral
//! density `Gamma_lambda` they carry, and the measure-theoretic hypotheses of
//! the restriction argument (curvature, Fourier decay, ball growth).

use std::f64::consts::PI;
use std::io;

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::gauss_legendre;
use crate::fit::{fit_loglog, DecayFit, Gate};
use crate::lattice::{GridSpec, TorusSymbol};
use crate::multiplier::MultiplierFunction;
use crate::norms::{conv_norm, NormReport};
use crate::{Error, Result};

/// Largest admissible `|G(node) - lambda|` after projection.
pub const SURFACE_TOL: f64 = 1e-10;
/// Levels closer than this to a critical value are rejected by strict extraction.
pub const CRITICAL_GAP: f64 = 1e-3;
const SINGULAR_GRAD: f64 = 1e-12;

/// `G(theta) = (1/n) sum_j cos theta_j`.
pub fn symbol_value(theta: &[f64]) -> f64 {
    theta.iter().map(|t| t.cos()).sum::<f64>() / theta.len() as f64
}

/// `|grad G(theta)|`.
pub fn grad_norm(theta: &[f64]) -> f64 {
    theta.iter().map(|t| t.sin().powi(2)).sum::<f64>().sqrt() / theta.len() as f64
}

/// Interior critical values `(n - 2m)/n`, `0 < m < n`.
pub fn critical_values(n: usize) -> Vec<f64> {
    (1..n).map(|m| (n as f64 - 2.0 * m as f64) / n as f64).collect()
}

/// Newton projection onto `{G = lambda}` along the gradient. Returns `|grad G|`
/// at the projected point.
fn project(x: &mut [f64], lambda: f64, permissive: bool) -> Result<f64> {
    let n = x.len() as f64;
    for _ in 0..60 {
        let r = symbol_value(x) - lambda;
        let g2: f64 = x.iter().map(|t| t.sin().powi(2)).sum::<f64>() / (n * n);
        if r.abs() <= 1e-14 {
            break;
        }
        if g2.sqrt() < SINGULAR_GRAD {
            if permissive && r.abs() <= SURFACE_TOL {
                break;
            }
            return Err(Error::SingularNode { grad: g2.sqrt() });
        }
        for t in x.iter_mut() {
            // grad G = -(1/n) sin theta
            *t += r * t.sin() / (n * g2);
        }
    }
    let r = symbol_value(x) - lambda;
    if r.abs() > SURFACE_TOL {
        return Err(Error::Degenerate(format!("projection residual {r:e} above tolerance")));
    }
    let g = grad_norm(x);
    if g < SINGULAR_GRAD && !permissive {
        return Err(Error::SingularNode { grad: g });
    }
    Ok(g)
}

/// How close to a critical value extraction may go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SurfaceMode {
    /// Reject levels within [`CRITICAL_GAP`] of a critical value.
    Strict,
    /// Accept any interior level; nodes with vanishing gradient are kept.
    Permissive,
}

/// A discretized level surface: segments for `n = 2`, triangles for `n = 3`.
/// Each element carries its measure, a quadrature node on the surface and
/// `|grad G|` at the node.
#[derive(Debug, Clone)]
pub struct LevelSurface {
    lambda: f64,
    n: usize,
    resolution: usize,
    refinement: usize,
    mode: SurfaceMode,
    /// `n` vertices of `n` coordinates per element.
    vertices: Vec<f64>,
    nodes: Vec<f64>,
    areas: Vec<f64>,
    grads: Vec<f64>,
}

pub fn extract_surface(n: usize, lambda: f64, resolution: usize) -> Result<LevelSurface> {
    extract_surface_with(n, lambda, resolution, SurfaceMode::Strict)
}

pub fn extract_surface_with(n: usize, lambda: f64, resolution: usize, mode: SurfaceMode) -> Result<LevelSurface> {
    if !(n == 2 || n == 3) {
        return Err(Error::InvalidArgument(format!("level surfaces need n in {{2, 3}}, got {n}")));
    }
    if !(lambda > -1.0 && lambda < 1.0) {
        return Err(Error::OutsideSpectrum { lambda });
    }
    if resolution < 4 {
        return Err(Error::InvalidArgument("resolution must be at least 4".into()));
    }
    if mode == SurfaceMode::Strict {
        for c in critical_values(n) {
            if (lambda - c).abs() < CRITICAL_GAP {
                return Err(Error::NearCritical { lambda, critical: c, gap: (lambda - c).abs() });
            }
        }
    }
    let permissive = mode == SurfaceMode::Permissive;
    // G(theta + pi) = -G(theta): negative levels are positive ones shifted by pi.
    let (level, shift) = if lambda < 0.0 { (-lambda, PI) } else { (lambda, 0.0) };
    let (origin, step) = domain(n, level, resolution);
    let raw = match n {
        2 => march_squares(level, origin, step, resolution),
        _ => march_tetrahedra(level, origin, step, resolution),
    };
    let mut vertices = raw;
    vertices
        .par_chunks_mut(n)
        .try_for_each(|v| project(v, level, permissive).map(|_| ()))?;
    if shift != 0.0 {
        vertices.iter_mut().for_each(|v| *v += shift);
    }
    let mut s = LevelSurface {
        lambda,
        n,
        resolution,
        refinement: 1,
        mode,
        vertices,
        nodes: Vec::new(),
        areas: Vec::new(),
        grads: Vec::new(),
    };
    s.fill_nodes()?;
    if s.is_empty() || s.weighted_measure() <= 0.0 {
        return Err(Error::Degenerate(format!("no surface found at level {lambda}; raise the resolution")));
    }
    Ok(s)
}

/// Marching grid `origin + step * i`, `i = 0..=resolution`, per axis. Levels
/// whose surface sits inside a box around the origin get a box just large
/// enough to hold it; otherwise the whole torus is covered by a half-cell
/// offset grid so no lattice vertex hits `theta_j in {0, pi}`.
fn domain(n: usize, level: f64, resolution: usize) -> (f64, f64) {
    let c = n as f64 * level - (n as f64 - 1.0);
    if c > -1.0 {
        let half = c.acos() * 1.05 + 1e-9;
        if half < 0.95 * PI {
            return (-half, 2.0 * half / resolution as f64);
        }
    }
    let step = 2.0 * PI / resolution as f64;
    (-PI + 0.5 * step, step)
}

fn crossing(a: &[f64], va: f64, b: &[f64], vb: f64, out: &mut Vec<f64>) {
    let t = va / (va - vb);
    out.extend(a.iter().zip(b).map(|(x, y)| x + t * (y - x)));
}

fn march_squares(level: f64, origin: f64, step: f64, r: usize) -> Vec<f64> {
    let coord = |i: usize| origin + step * i as f64;
    let vals: Vec<f64> = (0..=r)
        .flat_map(|i| (0..=r).map(move |j| (i, j)))
        .map(|(i, j)| symbol_value(&[coord(i), coord(j)]) - level)
        .collect();
    let v = |i: usize, j: usize| vals[i * (r + 1) + j];
    let mut out = Vec::new();
    for i in 0..r {
        for j in 0..r {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let cv: Vec<f64> = corners.iter().map(|&(a, b)| v(a, b)).collect();
            let pts: Vec<[f64; 2]> = corners.iter().map(|&(a, b)| [coord(a), coord(b)]).collect();
            let pos: Vec<bool> = cv.iter().map(|x| *x >= 0.0).collect();
            let cut: Vec<usize> = (0..4).filter(|&e| pos[e] != pos[(e + 1) % 4]).collect();
            let mut seg = |e0: usize, e1: usize| {
                for e in [e0, e1] {
                    let f = (e + 1) % 4;
                    crossing(&pts[e], cv[e], &pts[f], cv[f], &mut out);
                }
            };
            match cut.len() {
                2 => seg(cut[0], cut[1]),
                4 => {
                    let mid = [coord(i) + 0.5 * step, coord(j) + 0.5 * step];
                    if (symbol_value(&mid) - level >= 0.0) == pos[0] {
                        seg(0, 1);
                        seg(2, 3);
                    } else {
                        seg(3, 0);
                        seg(1, 2);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Kuhn split of the unit cube into six tetrahedra sharing the main diagonal;
/// corners are encoded as bit patterns `x | y << 1 | z << 2`.
const KUHN: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

fn march_tetrahedra(level: f64, origin: f64, step: f64, r: usize) -> Vec<f64> {
    let coord = |i: usize| origin + step * i as f64;
    let cs: Vec<f64> = (0..=r).map(|i| coord(i).cos() / 3.0).collect();
    let idx = |i: usize, j: usize, k: usize| (i * (r + 1) + j) * (r + 1) + k;
    let mut vals = vec![0.0; (r + 1).pow(3)];
    for i in 0..=r {
        for j in 0..=r {
            for k in 0..=r {
                vals[idx(i, j, k)] = cs[i] + cs[j] + cs[k] - level;
            }
        }
    }
    (0..r)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for j in 0..r {
                for k in 0..r {
                    let corner = |c: usize| (i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                    for tet in KUHN {
                        let p: Vec<[f64; 3]> = tet
                            .iter()
                            .map(|&c| {
                                let (a, b, d) = corner(c);
                                [coord(a), coord(b), coord(d)]
                            })
                            .collect();
                        let v: Vec<f64> = tet
                            .iter()
                            .map(|&c| {
                                let (a, b, d) = corner(c);
                                vals[idx(a, b, d)]
                            })
                            .collect();
                        let pos: Vec<usize> = (0..4).filter(|&t| v[t] >= 0.0).collect();
                        let neg: Vec<usize> = (0..4).filter(|&t| v[t] < 0.0).collect();
                        let edge = |a: usize, b: usize, out: &mut Vec<f64>| crossing(&p[a], v[a], &p[b], v[b], out);
                        match (pos.len(), neg.len()) {
                            (1, 3) | (3, 1) => {
                                let (lone, rest) = if pos.len() == 1 { (pos[0], &neg) } else { (neg[0], &pos) };
                                for &o in rest.iter() {
                                    edge(lone, o, &mut out);
                                }
                            }
                            (2, 2) => {
                                let (a, b, c, d) = (pos[0], pos[1], neg[0], neg[1]);
                                for (x, y) in [(a, c), (a, d), (b, d), (a, c), (b, d), (b, c)] {
                                    edge(x, y, &mut out);
                                }
                            }
                            _ => {}
                        }
                    }
                }
            }
            out
        })
        .reduce(Vec::new, |mut a, b| {
            a.extend(b);
            a
        })
}

fn element_measure(v: &[f64], n: usize) -> f64 {
    match n {
        2 => ((v[2] - v[0]).powi(2) + (v[3] - v[1]).powi(2)).sqrt(),
        _ => {
            let a = [v[3] - v[0], v[4] - v[1], v[5] - v[2]];
            let b = [v[6] - v[0], v[7] - v[1], v[8] - v[2]];
            let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
            0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
        }
    }
}

impl LevelSurface {
    fn fill_nodes(&mut self) -> Result<()> {
        let n = self.n;
        let level = if self.lambda < 0.0 { -self.lambda } else { self.lambda };
        let shift = if self.lambda < 0.0 { PI } else { 0.0 };
        let permissive = self.mode == SurfaceMode::Permissive;
        let per: Vec<(Vec<f64>, f64, f64)> = self
            .vertices
            .par_chunks(n * n)
            .map(|v| {
                let mut c: Vec<f64> = (0..n).map(|j| (0..n).map(|k| v[k * n + j]).sum::<f64>() / n as f64 - shift).collect();
                let g = project(&mut c, level, permissive)?;
                c.iter_mut().for_each(|x| *x += shift);
                Ok((c, element_measure(v, n), g))
            })
            .collect::<Result<_>>()?;
        self.nodes = per.iter().flat_map(|p| p.0.iter().copied()).collect();
        self.areas = per.iter().map(|p| p.1).collect();
        self.grads = per.iter().map(|p| p.2).collect();
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Total subdivision factor applied since extraction.
    pub fn refinement(&self) -> usize {
        self.refinement
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn node(&self, e: usize) -> &[f64] {
        &self.nodes[e * self.n..(e + 1) * self.n]
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    pub fn grad(&self, e: usize) -> f64 {
        self.grads[e]
    }

    /// Unweighted surface measure.
    pub fn total_measure(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// `int_sigma dsigma / |grad G|`.
    pub fn weighted_measure(&self) -> f64 {
        self.areas.iter().zip(&self.grads).map(|(a, g)| a / g).sum()
    }

    /// Largest element edge.
    pub fn max_element_size(&self) -> f64 {
        let n = self.n;
        self.vertices
            .chunks(n * n)
            .map(|v| {
                let mut m: f64 = 0.0;
                for a in 0..n {
                    for b in a + 1..n {
                        let d: f64 = (0..n).map(|j| (v[a * n + j] - v[b * n + j]).powi(2)).sum();
                        m = m.max(d.sqrt());
                    }
                }
                m
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|G(x) - lambda|` over vertices and nodes.
    pub fn max_residual(&self) -> f64 {
        self.vertices
            .chunks(self.n)
            .chain(self.nodes.chunks(self.n))
            .map(|x| (symbol_value(x) - self.lambda).abs())
            .fold(0.0, f64::max)
    }

    /// Twice the largest node distance from the surface's symmetry center.
    pub fn diameter(&self) -> f64 {
        let center = if self.lambda < 0.0 { PI } else { 0.0 };
        self.nodes
            .chunks(self.n)
            .map(|x| x.iter().map(|t| (t - center).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
            * 2.0
    }

    /// Splits every element into `factor` pieces per edge and re-projects.
    pub fn refined(&self, factor: usize) -> Result<LevelSurface> {
        if factor <= 1 {
            return Ok(self.clone());
        }
        let n = self.n;
        let level = self.lambda.abs();
        let shift = if self.lambda < 0.0 { PI } else { 0.0 };
        let permissive = self.mode == SurfaceMode::Permissive;
        let f = factor as f64;
        let place = |p: Vec<f64>| -> Result<Vec<f64>> {
            let mut q: Vec<f64> = p.iter().map(|x| x - shift).collect();
            project(&mut q, level, permissive)?;
            Ok(q.into_iter().map(|x| x + shift).collect())
        };
        let vertices: Vec<f64> = self
            .vertices
            .par_chunks(n * n)
            .map(|v| -> Result<Vec<f64>> {
                let mut out = Vec::new();
                if n == 2 {
                    let pts: Vec<Vec<f64>> = (0..=factor)
                        .map(|k| {
                            let t = k as f64 / f;
                            let p = vec![v[0] + t * (v[2] - v[0]), v[1] + t * (v[3] - v[1])];
                            if k == 0 || k == factor {
                                Ok(p)
                            } else {
                                place(p)
                            }
                        })
                        .collect::<Result<_>>()?;
                    for k in 0..factor {
                        out.extend(&pts[k]);
                        out.extend(&pts[k + 1]);
                    }
                } else {
                    let (a, b, c) = (&v[0..3], &v[3..6], &v[6..9]);
                    let mut grid = vec![Vec::new(); (factor + 1) * (factor + 1)];
                    for i in 0..=factor {
                        for j in 0..=factor - i {
                            let (s, t) = (i as f64 / f, j as f64 / f);
                            let p: Vec<f64> = (0..3).map(|d| a[d] + s * (b[d] - a[d]) + t * (c[d] - a[d])).collect();
                            let corner = (i == 0 && j == 0) || i == factor || j == factor;
                            grid[i * (factor + 1) + j] = if corner { p } else { place(p)? };
                        }
                    }
                    let at = |i: usize, j: usize| &grid[i * (factor + 1) + j];
                    for i in 0..factor {
                        for j in 0..factor - i {
                            out.extend(at(i, j));
                            out.extend(at(i + 1, j));
                            out.extend(at(i, j + 1));
                            if i + j + 1 < factor {
                                out.extend(at(i + 1, j));
                                out.extend(at(i + 1, j + 1));
                                out.extend(at(i, j + 1));
                            }
                        }
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        let mut s = LevelSurface {
            vertices,
            refinement: self.refinement * factor,
            nodes: Vec::new(),
            areas: Vec::new(),
            grads: Vec::new(),
            ..*self
        };
        s.fill_nodes()?;
        Ok(s)
    }

    /// Refinement that brings elements below `size`.
    pub fn refined_to(&self, size: f64) -> Result<LevelSurface> {
        let factor = (self.max_element_size() / size).ceil().max(1.0) as usize;
        self.refined(factor)
    }

    /// Levels in `(1 - 1/n, 1)`, where the surface is a convex shell around the origin.
    pub fn in_rescaling_window(&self) -> bool {
        self.lambda > 1.0 - 1.0 / self.n as f64
    }

    fn require_window(&self) -> Result<f64> {
        if !self.in_rescaling_window() {
            return Err(Error::InvalidArgument(format!(
                "level {} is outside the rescaling window ({}, 1)",
                self.lambda,
                1.0 - 1.0 / self.n as f64
            )));
        }
        Ok((1.0 - self.lambda).sqrt())
    }

    /// Node `e` on the rescaled surface `(1 - lambda)^{-1/2} sigma_lambda`.
    pub fn rescaled_node(&self, e: usize) -> Result<Vec<f64>> {
        let s = self.require_window()?;
        Ok(self.node(e).iter().map(|x| x / s).collect())
    }

    /// Element table: `element, theta_1..theta_n, area, grad, curvature`.
    /// Curvature is left empty outside the rescaling window.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["element".to_string()];
        header.extend((1..=self.n).map(|j| format!("theta_{j}")));
        header.extend(["area", "grad", "curvature"].map(String::from));
        w.write_record(&header)?;
        let s = self.require_window().ok();
        for e in 0..self.len() {
            let mut rec = vec![e.to_string()];
            rec.extend(self.node(e).iter().map(|x| format!("{x:?}")));
            rec.push(format!("{:?}", self.area(e)));
            rec.push(format!("{:?}", self.grad(e)));
            let k = match s {
                Some(s) => {
                    let t: Vec<f64> = self.node(e).iter().map(|x| x / s).collect();
                    format!("{:?}", curvature(&t, self.lambda)?)
                }
                None => String::new(),
            };
            rec.push(k);
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How a slice of the spectral measure was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SliceMethod {
    SurfaceQuadrature,
    BandAverage,
}

/// Values of the spectral density kernel on the window `|d|_inf <= window`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralSlice {
    pub lambda: f64,
    pub n: usize,
    pub window: usize,
    /// Row-major over `d_1, ..., d_n in -window..=window`.
    pub values: Vec<f64>,
    pub n_lambda: Option<f64>,
    pub method: SliceMethod,
    /// Largest change under one more 2x refinement, relative to the value at 0.
    pub refinement_change: f64,
    pub flagged: bool,
}

impl SpectralSlice {
    fn index(&self, d: &[i64]) -> Option<usize> {
        let w = self.window as i64;
        let side = 2 * w + 1;
        if d.len() != self.n || d.iter().any(|x| x.abs() > w) {
            return None;
        }
        Some(d.iter().fold(0, |acc, x| acc * side + (x + w)) as usize)
    }

    pub fn get(&self, d: &[i64]) -> Option<f64> {
        self.index(d).map(|i| self.values[i])
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Largest violation of `d -> -d_j` and adjacent-coordinate swap invariance,
    /// relative to the value at the origin.
    pub fn symmetry_defect(&self) -> f64 {
        let w = self.window as i64;
        let scale = self.get(&vec![0; self.n]).unwrap_or(1.0).abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let d = window_point(i, self.n, w);
            for j in 0..self.n {
                let mut e = d.clone();
                e[j] = -e[j];
                worst = worst.max((v - self.get(&e).unwrap()).abs());
                if j + 1 < self.n {
                    let mut e = d.clone();
                    e.swap(j, j + 1);
                    worst = worst.max((v - self.get(&e).unwrap()).abs());
                }
            }
        }
        worst / scale
    }
}

fn window_point(mut i: usize, n: usize, w: i64) -> Vec<i64> {
    let side = (2 * w + 1) as usize;
    let mut d = vec![0i64; n];
    for j in (0..n).rev() {
        d[j] = (i % side) as i64 - w;
        i /= side;
    }
    d
}

fn surface_transform(surface: &LevelSurface, window: usize) -> Vec<f64> {
    let n = surface.n;
    let w = window as i64;
    let side = 2 * window + 1;
    let total = side.pow(n as u32);
    let norm = (2.0 * PI).powi(n as i32);
    // fixed chunks summed in order keep the result independent of the thread count
    let idx: Vec<usize> = (0..surface.len()).collect();
    let partials: Vec<Vec<f64>> = idx
        .par_chunks(1024)
        .map(|chunk| {
            let mut acc = vec![0.0; total];
            for &e in chunk {
                let node = surface.node(e);
                let weight = surface.area(e) / surface.grad(e);
                let phases: Vec<Vec<Complex<f64>>> = node
                    .iter()
                    .map(|t| (-w..=w).map(|k| Complex::from_polar(1.0, k as f64 * t)).collect())
                    .collect();
                for (i, a) in acc.iter_mut().enumerate() {
                    let mut rest = i;
                    let mut z = Complex::new(weight, 0.0);
                    for j in (0..n).rev() {
                        z *= phases[j][rest % side];
                        rest /= side;
                    }
                    *a += z.re;
                }
            }
            acc
        })
        .collect();
    let mut acc = vec![0.0; total];
    for p in partials {
        acc.iter_mut().zip(p).for_each(|(x, y)| *x += y);
    }
    acc.into_iter().map(|v| v / norm).collect()
}

/// `Gamma_lambda(d) = (2 pi)^{-n} int_sigma e^{i<d,theta>} dsigma / |grad G|` by
/// midpoint quadrature on elements no longer than `2 pi / (8 window + 1)`.
/// The slice is flagged when one more 2x refinement moves it by more than 1%.
pub fn gamma_lambda(surface: &LevelSurface, window: usize) -> Result<SpectralSlice> {
    let limit = 2.0 * PI / (8.0 * window as f64 + 1.0);
    let base = if surface.max_element_size() > limit { surface.refined_to(limit)? } else { surface.clone() };
    let fine = base.refined(2)?;
    let coarse_vals = surface_transform(&base, window);
    let values = surface_transform(&fine, window);
    let n = surface.n;
    let origin = values[values.len() / 2].abs().max(f64::MIN_POSITIVE);
    let change = values.iter().zip(&coarse_vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / origin;
    let n_lambda = if fine.in_rescaling_window() { Some(n_lambda(&fine)?) } else { None };
    Ok(SpectralSlice {
        lambda: surface.lambda,
        n,
        window,
        values,
        n_lambda,
        method: SliceMethod::SurfaceQuadrature,
        refinement_change: change,
        flagged: change > 0.01,
    })
}

/// Band projector `E((lambda - delta/2, lambda + delta/2]) / delta` computed
/// exactly on the grid by selecting symbol samples.
pub fn band_average(grid: GridSpec, lambda: f64, delta: f64, window: usize) -> Result<SpectralSlice> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("band width must be positive".into()));
    }
    if window >= grid.samples() / 2 {
        return Err(Error::InvalidArgument("window exceeds half the grid".into()));
    }
    let (lo, hi) = (lambda - delta / 2.0, lambda + delta / 2.0);
    let sym = band_symbol(grid, lo, hi);
    let count = sym.values().iter().filter(|v| v.re > 0.0).count();
    if count == 0 {
        return Err(Error::Degenerate(format!("empty band ({lo}, {hi}]")));
    }
    if count < 1000 {
        return Err(Error::Degenerate(format!("band holds {count} samples, need at least 1000")));
    }
    let ker = sym.to_kernel();
    let n = grid.dim();
    let side = 2 * window + 1;
    let values = (0..side.pow(n as u32)).map(|i| ker.at(&window_point(i, n, window as i64)).re / delta).collect();
    Ok(SpectralSlice {
        lambda,
        n,
        window,
        values,
        n_lambda: None,
        method: SliceMethod::BandAverage,
        refinement_change: 0.0,
        flagged: false,
    })
}

fn band_symbol(grid: GridSpec, lo: f64, hi: f64) -> TorusSymbol<f64> {
    TorusSymbol::from_fn(grid, |theta: &[f64]| {
        let g = symbol_value(theta);
        Complex::new(if g > lo && g <= hi { 1.0 } else { 0.0 }, 0.0)
    })
}

/// `N(lambda) = int over the rescaled surface of dsigma~ / |grad G|`.
pub fn n_lambda(surface: &LevelSurface) -> Result<f64> {
    let s = surface.require_window()?;
    Ok(surface.weighted_measure() / s.powi(surface.n as i32 - 1))
}

#[derive(Debug, Clone, Serialize)]
pub struct NLambdaFit {
    /// `(lambda, N(lambda))`.
    pub rows: Vec<(f64, f64)>,
    /// Exponent of `N` in `1 - lambda`.
    pub fit: DecayFit,
}

pub fn n_lambda_fit(n: usize, ladder: &[f64], resolution: usize) -> Result<NLambdaFit> {
    check_ladder(n, ladder, 2)?;
    let rows: Vec<(f64, f64)> = ladder
        .par_iter()
        .map(|&l| Ok((l, n_lambda(&extract_surface(n, l, resolution)?)?)))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| 1.0 - r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = fit_loglog(&xs, &ys)?.with_gate(Gate::Within { target: -0.5, tol: 0.1 });
    Ok(NLambdaFit { rows, fit })
}

fn check_ladder(n: usize, ladder: &[f64], min_len: usize) -> Result<()> {
    if ladder.len() < min_len {
        return Err(Error::InvalidArgument(format!("ladder needs at least {min_len} levels, got {}", ladder.len())));
    }
    let lo = 1.0 - 1.0 / n as f64;
    if let Some(l) = ladder.iter().find(|l| !(**l > lo && **l < 1.0)) {
        return Err(Error::InvalidArgument(format!("level {l} leaves the window ({lo}, 1)")));
    }
    Ok(())
}

/// `lambda = 1 - 2^{-j} / n` for `j` in `js`.
pub fn dyadic_ladder(n: usize, js: impl IntoIterator<Item = i32>) -> Vec<f64> {
    js.into_iter().map(|j| 1.0 - 2f64.powi(-j) / n as f64).collect()
}

/// Extremes of `|grad G|(sqrt(1 - lambda) theta) / sqrt(1 - lambda)` over the nodes.
pub fn gradient_ratio_range(surface: &LevelSurface) -> Result<(f64, f64)> {
    let s = surface.require_window()?;
    let r = surface.grads.iter().map(|g| g / s);
    Ok(r.fold((f64::INFINITY, 0.0), |(lo, hi), x| (lo.min(x), hi.max(x))))
}

/// Gaussian curvature at a node `t` of the rescaled surface, closed form
/// `(-1)^{n-1} s^{n-1} sum_j sin^2 phi_j prod_{i != j} cos phi_i / |sin phi|^{n+1}`
/// with `s = sqrt(1 - lambda)`, `phi = s t`.
pub fn curvature(t: &[f64], lambda: f64) -> Result<f64> {
    let n = t.len();
    let s = (1.0 - lambda).sqrt();
    let phi: Vec<f64> = t.iter().map(|x| s * x).collect();
    let sin2: Vec<f64> = phi.iter().map(|p| p.sin().powi(2)).collect();
    let total: f64 = sin2.iter().sum();
    let grad = s * total.sqrt() / n as f64;
    if grad < SINGULAR_GRAD {
        return Err(Error::SingularNode { grad });
    }
    let num: f64 = (0..n)
        .map(|j| sin2[j] * (0..n).filter(|&i| i != j).map(|i| phi[i].cos()).product::<f64>())
        .sum();
    let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
    Ok(sign * s.powi(n as i32 - 1) * num / total.powf((n as f64 + 1.0) / 2.0))
}

/// Gaussian curvature from the bordered Hessian of `G~(t) = G(sqrt(1 - lambda) t)`.
pub fn curvature_bordered(t: &[f64], lambda: f64) -> Result<f64> {
    let n = t.len();
    let s = (1.0 - lambda).sqrt();
    let nf = n as f64;
    let grad: Vec<f64> = t.iter().map(|x| -(s / nf) * (s * x).sin()).collect();
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if gnorm < SINGULAR_GRAD {
        return Err(Error::SingularNode { grad: gnorm });
    }
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    for j in 0..n {
        m[(j, j)] = -(s * s / nf) * (s * t[j]).cos();
        m[(j, n)] = grad[j];
        m[(n, j)] = grad[j];
    }
    Ok(-m.determinant() / gnorm.powi(n as i32 + 1))
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub lambda: f64,
    pub min_abs: f64,
    pub max_abs: f64,
    /// `max |K| / min |K| - 1`.
    pub spread: f64,
    /// Largest gap between the closed form and the bordered determinant.
    pub method_gap: f64,
    /// `cos(sqrt(1 - lambda) theta_j) >= 1 - (1 - lambda) n` at every node.
    pub cosine_bound_holds: bool,
}

pub fn curvature_report(surface: &LevelSurface) -> Result<CurvatureReport> {
    let s = surface.require_window()?;
    let n = surface.n;
    let lambda = surface.lambda;
    let floor = 1.0 - (1.0 - lambda) * n as f64;
    let per: Vec<(f64, f64, bool)> = (0..surface.len())
        .into_par_iter()
        .map(|e| {
            let t: Vec<f64> = surface.node(e).iter().map(|x| x / s).collect();
            let k = curvature(&t, lambda)?;
            let kb = curvature_bordered(&t, lambda)?;
            let cos_ok = t.iter().all(|x| (s * x).cos() >= floor - 1e-12);
            Ok((k, (k - kb).abs(), cos_ok))
        })
        .collect::<Result<_>>()?;
    let min_abs = per.iter().map(|p| p.0.abs()).fold(f64::INFINITY, f64::min);
    let max_abs = per.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    Ok(CurvatureReport {
        lambda,
        min_abs,
        max_abs,
        spread: max_abs / min_abs - 1.0,
        method_gap: per.iter().map(|p| p.1).fold(0.0, f64::max),
        cosine_bound_holds: per.iter().all(|p| p.2),
    })
}

/// Rescaled nodes and normalized `mu_lambda` weights.
fn mu_atoms(surface: &LevelSurface) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = surface.require_window()?;
    let nodes: Vec<f64> = surface.nodes.iter().map(|x| x / s).collect();
    let raw: Vec<f64> = surface.areas.iter().zip(&surface.grads).map(|(a, g)| a / g).collect();
    let total: f64 = raw.iter().sum();
    Ok((nodes, raw.into_iter().map(|w| w / total).collect()))
}

fn mu_hat_atoms(nodes: &[f64], weights: &[f64], xi: &[f64]) -> Complex<f64> {
    let n = xi.len();
    weights
        .iter()
        .enumerate()
        .map(|(e, w)| {
            let phase: f64 = (0..n).map(|j| xi[j] * nodes[e * n + j]).sum();
            Complex::from_polar(*w, -phase)
        })
        .sum()
}

/// `mu_lambda^(xi) = int e^{-i<xi,t>} dmu_lambda(t)` on the rescaled surface.
pub fn mu_hat(surface: &LevelSurface, xi: &[f64]) -> Result<Complex<f64>> {
    if xi.len() != surface.n {
        return Err(Error::InvalidArgument("frequency dimension mismatch".into()));
    }
    let (nodes, weights) = mu_atoms(surface)?;
    Ok(mu_hat_atoms(&nodes, &weights, xi))
}

/// Fixed probe directions: evenly spaced angles in the plane, a symmetric
/// star in space.
pub fn ray_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        return (0..count)
            .map(|k| {
                let a = PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let base: [[f64; 3]; 8] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [1.0, 1.0, 1.0],
        [1.0, 2.0, 3.0],
    ];
    base.iter()
        .cycle()
        .take(count)
        .map(|v| {
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v.iter().map(|x| x / r).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MuDecay {
    pub lambda: f64,
    /// `(bin center |xi|, max over rays and bin samples of |mu^|)`.
    pub envelope: Vec<(f64, f64)>,
    /// Bins whose value moved more than 10% under 2x refinement.
    pub dropped: Vec<f64>,
    /// `sup |mu^(xi)| (1 + |xi|)^{(n-1)/2}` over the kept samples.
    pub weighted_sup: f64,
    pub at_zero: f64,
    pub fit: DecayFit,
}

/// Upper envelope of `|mu_lambda^|` on octave bins `[2^b, 2^{b+1})` up to
/// `xi_max`, sampled along `rays` directions at 12 magnitudes per bin.
pub fn mu_fourier_decay(surface: &LevelSurface, xi_max: f64, rays: usize) -> Result<MuDecay> {
    let n = surface.n;
    let dirs = ray_directions(n, rays);
    let s = surface.require_window()?;
    let (n0, w0) = mu_atoms(surface)?;
    let at_zero = mu_hat_atoms(&n0, &w0, &vec![0.0; n]).norm();
    let mut envelope = Vec::new();
    let mut dropped = Vec::new();
    let mut lo = 1.0f64;
    while lo < xi_max {
        let hi = (2.0 * lo).min(xi_max);
        // element sizes are compared in rescaled units
        let limit = 2.0 * PI / (8.0 * hi + 1.0) * s;
        let base = if surface.max_element_size() > limit { surface.refined_to(limit)? } else { surface.clone() };
        let fine = base.refined(2)?;
        let (nb, wb) = mu_atoms(&base)?;
        let (nf, wf) = mu_atoms(&fine)?;
        let samples: Vec<Vec<f64>> = (0..12)
            .flat_map(|k| {
                let r = lo + (hi - lo) * (k as f64 + 0.5) / 12.0;
                dirs.iter().map(move |d| d.iter().map(|x| x * r).collect::<Vec<f64>>())
            })
            .collect();
        let vals: Vec<(f64, f64)> = samples
            .par_iter()
            .map(|xi| (mu_hat_atoms(&nb, &wb, xi).norm(), mu_hat_atoms(&nf, &wf, xi).norm()))
            .collect();
        let top = vals.iter().map(|v| v.1).fold(0.0, f64::max);
        let gap = vals.iter().map(|v| (v.0 - v.1).abs()).fold(0.0, f64::max);
        let center = (lo * hi).sqrt();
        if gap > 0.1 * top {
            dropped.push(center);
        } else {
            envelope.push((center, top, hi));
        }
        lo = hi;
    }
    let weighted_sup = envelope
        .iter()
        .map(|(_, v, hi)| v * (1.0 + hi).powf((n as f64 - 1.0) / 2.0))
        .fold(at_zero, f64::max);
    let envelope: Vec<(f64, f64)> = envelope.into_iter().map(|(c, v, _)| (c, v)).collect();
    let xs: Vec<f64> = envelope.iter().map(|e| e.0).collect();
    let ys: Vec<f64> = envelope.iter().map(|e| e.1).collect();
    let fit = fit_loglog(&xs, &ys)?.with_gate(Gate::AtMost { bound: -(n as f64 - 1.0) / 2.0 + 0.1 });
    Ok(MuDecay { lambda: surface.lambda, envelope, dropped, weighted_sup, at_zero, fit })
}

#[derive(Debug, Clone, Serialize)]
pub struct BallGrowth {
    pub lambda: f64,
    pub radii: Vec<f64>,
    /// Largest `mu_lambda(B(x, r))` over the sampled centers, per radius.
    pub sup_mass: Vec<f64>,
    /// `sup mu(B(x, r)) / r^{n-1}` over all sampled balls.
    pub m1: f64,
    pub fit: DecayFit,
}

/// `mu_lambda(B(x, r))` for `centers` random surface points and the given radii
/// (rescaled units, open Euclidean balls).
pub fn ball_growth(surface: &LevelSurface, radii: &[f64], centers: usize, seed: u64) -> Result<BallGrowth> {
    let n = surface.n;
    let s = surface.require_window()?;
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    if radii.len() < 2 || !(r_min > 0.0) {
        return Err(Error::InvalidArgument("need at least two positive radii".into()));
    }
    let fine = surface.refined_to(r_min * s / 8.0)?;
    let (nodes, weights) = mu_atoms(&fine)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = (0..centers).map(|_| rng.random_range(0..weights.len())).collect();
    let masses: Vec<Vec<f64>> = picks
        .par_iter()
        .map(|&c| {
            let x = &nodes[c * n..(c + 1) * n];
            let d: Vec<f64> = (0..weights.len())
                .map(|e| (0..n).map(|j| (nodes[e * n + j] - x[j]).powi(2)).sum::<f64>().sqrt())
                .collect();
            radii
                .iter()
                .map(|r| d.iter().zip(&weights).filter(|(di, _)| **di < *r).map(|(_, w)| w).sum())
                .collect()
        })
        .collect();
    let sup_mass: Vec<f64> = (0..radii.len()).map(|k| masses.iter().map(|m| m[k]).fold(0.0, f64::max)).collect();
    let m1 = masses
        .iter()
        .flat_map(|m| m.iter().zip(radii).map(|(v, r)| v / r.powi(n as i32 - 1)))
        .fold(0.0, f64::max);
    let fit = fit_loglog(radii, &sup_mass)?.with_gate(Gate::Within { target: n as f64 - 1.0, tol: 0.15 });
    Ok(BallGrowth { lambda: surface.lambda, radii: radii.to_vec(), sup_mass, m1, fit })
}

/// Tuning for [`spectral_norm_decay`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralDecayOptions {
    /// Marching resolution for the surface quadrature (`p = 1`).
    pub resolution: usize,
    pub window: usize,
    /// Grid samples for the band-average kernels used when `p > 1`.
    pub samples: usize,
    /// Band width as a fraction of `1 - lambda` (`p > 1`).
    pub band_fraction: f64,
}

impl Default for SpectralDecayOptions {
    fn default() -> Self {
        SpectralDecayOptions { resolution: 128, window: 2, samples: 1024, band_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralDecay {
    pub n: usize,
    pub p: f64,
    /// `n (1/p - 1/p') / 2 - 1`.
    pub target: f64,
    /// `(lambda, norm)`; exact for `p = 1`, an upper bound otherwise.
    pub rows: Vec<(f64, f64)>,
    pub exact: bool,
    pub method: String,
    pub fit: DecayFit,
}

/// Exponent of `||dE(lambda)||_{p -> p'}` in `1 - lambda`. For `p = 1` the norm
/// is `sup_d |Gamma_lambda(d)|`; for `1 < p < (2n+2)/(n+3)` the band-average
/// kernel's interpolated upper bound is reported instead.
pub fn spectral_norm_decay(n: usize, p: f64, ladder: &[f64], opts: SpectralDecayOptions) -> Result<SpectralDecay> {
    check_ladder(n, ladder, 5)?;
    let nf = n as f64;
    let p_max = (2.0 * nf + 2.0) / (nf + 3.0);
    if !(p == 1.0 || (p > 1.0 && p < p_max)) {
        return Err(Error::UnsupportedExponents {
            p,
            q: p / (p - 1.0),
            reason: format!("need p = 1 or 1 < p < {p_max}"),
        });
    }
    let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let target = nf * (1.0 / p - 1.0 / q) / 2.0 - 1.0;
    let (rows, exact, method): (Vec<(f64, f64)>, bool, String) = if p == 1.0 {
        let rows = ladder
            .par_iter()
            .map(|&l| Ok((l, gamma_lambda(&extract_surface(n, l, opts.resolution)?, opts.window)?.sup_abs())))
            .collect::<Result<_>>()?;
        (rows, true, "surface quadrature, sup |Gamma|".into())
    } else {
        let grid = GridSpec::new(n, opts.samples)?;
        let rows = ladder
            .iter()
            .map(|&l| {
                let delta = opts.band_fraction * (1.0 - l);
                let (lo, hi) = (l - delta / 2.0, l + delta / 2.0);
                let ker = band_symbol(grid, lo, hi).to_kernel();
                let rep: NormReport = conv_norm(&ker, p, q)?;
                Ok((l, rep.upper / delta))
            })
            .collect::<Result<_>>()?;
        (rows, false, "band average, interpolated upper bound".into())
    };
    let xs: Vec<f64> = rows.iter().map(|r| 1.0 - r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let gate = if exact { Gate::Within { target, tol: 0.15 } } else { Gate::AtLeast { bound: target - 0.15 } };
    let fit = fit_loglog(&xs, &ys)?.with_gate(gate);
    Ok(SpectralDecay { n, p, target, rows, exact, method, fit })
}

#[derive(Debug, Clone, Serialize)]
pub struct RestrictionCheck {
    pub n: usize,
    /// `(k, ||F(A^k) A^k||_{1->2}^2, value * k^{n/2})`.
    pub rows: Vec<(u32, f64, f64)>,
    /// Largest relative change between grids `M` and `M/2`.
    pub grid_change: f64,
    /// Raw slope in `k`; `None` for the zero multiplier.
    pub fit: Option<DecayFit>,
    /// Slope after the volume normalization `k^{n/2}`.
    pub normalized_fit: Option<DecayFit>,
}

fn mean_square_on_grid(n: usize, m: usize, f: &MultiplierFunction<f64>, k: u32) -> f64 {
    let cs: Vec<f64> = (0..m).map(|i| (2.0 * PI * i as f64 / m as f64).cos()).collect();
    let sup = f.support();
    let value = |g: f64| {
        let x = g.powi(k as i32);
        if x < sup.lo || x > sup.hi {
            0.0
        } else {
            (f.eval(x) * x).powi(2)
        }
    };
    let nf = n as f64;
    let sum: f64 = match n {
        1 => cs.iter().map(|c| value(*c)).sum(),
        2 => cs.par_iter().map(|a| cs.iter().map(|b| value((a + b) / nf)).sum::<f64>()).collect::<Vec<_>>().iter().sum(),
        _ => cs
            .par_iter()
            .map(|a| cs.iter().map(|b| cs.iter().map(|c| value((a + b + c) / nf)).sum::<f64>()).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum(),
    };
    sum / (m as f64).powi(n as i32)
}

/// `||F(A^k) A^k||_{1->2}^2 = (2 pi)^{-n} int |F(G^k) G^k|^2` by Parseval, on a
/// grid that puts at least 16 samples across the radial width of the support
/// annulus. `F` must live in `(1 - 1/n, 1)`.
pub fn restriction_st_check(n: usize, ks: &[u32], f: &MultiplierFunction<f64>) -> Result<RestrictionCheck> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidArgument(format!("dimension {n} not supported")));
    }
    let sup = f.support();
    let nf = n as f64;
    if sup.width() == 0.0 {
        let rows = ks.iter().map(|&k| (k, 0.0, 0.0)).collect();
        return Ok(RestrictionCheck { n, rows, grid_change: 0.0, fit: None, normalized_fit: None });
    }
    if !sup.inside_open(1.0 - 1.0 / nf, 1.0) {
        return Err(Error::SupportViolation { lo: sup.lo, hi: sup.hi, required: format!("({}, 1)", 1.0 - 1.0 / nf) });
    }
    if ks.iter().any(|k| *k == 0) {
        return Err(Error::InvalidArgument("powers must be positive".into()));
    }
    let budget: usize = match n {
        1 => 1 << 22,
        2 => 4096,
        _ => 256,
    };
    let results: Vec<(u32, f64, f64)> = ks
        .iter()
        .map(|&k| {
            let radius = |x: f64| (2.0 * nf * (1.0 - x.powf(1.0 / k as f64))).sqrt();
            let width = radius(sup.lo) - radius(sup.hi);
            let m = ((32.0 * PI / width).ceil() as usize).next_power_of_two().clamp(64, budget);
            let fine = mean_square_on_grid(n, m, f, k);
            let coarse = mean_square_on_grid(n, m / 2, f, k);
            let change = if fine > 0.0 { (fine - coarse).abs() / fine } else { 0.0 };
            (k, fine, change)
        })
        .collect();
    let grid_change = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let rows: Vec<(u32, f64, f64)> =
        results.iter().map(|&(k, v, _)| (k, v, v * (k as f64).powf(nf / 2.0))).collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let raw: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let normalized: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let fit = fit_loglog(&xs, &raw)?.with_gate(Gate::AtMost { bound: -nf / 2.0 + 0.15 });
    let normalized_fit = fit_loglog(&xs, &normalized)?.with_gate(Gate::AtMost { bound: 0.15 });
    Ok(RestrictionCheck { n, rows, grid_change, fit: Some(fit), normalized_fit: Some(normalized_fit) })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityOfStates {
    pub n: usize,
    /// `(lambda, Gamma_lambda(0))` at the quadrature nodes.
    pub rows: Vec<(f64, f64)>,
    pub integral: f64,
}

/// `int_{-1}^{1} Gamma_lambda(0) d lambda` by Gauss-Legendre quadrature in
/// `lambda`; the exact value is 1.
pub fn density_of_states(n: usize, order: usize, resolution: usize) -> Result<DensityOfStates> {
    let (nodes, weights) = gauss_legendre(order);
    let norm = (2.0 * PI).powi(n as i32);
    let rows: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|&l| {
            let surf = extract_surface(n, l, resolution)?;
            Ok((l, surf.weighted_measure() / norm))
        })
        .collect::<Result<_>>()?;
    let integral = rows.iter().zip(&weights).map(|(r, w)| r.1 * w).sum();
    Ok(DensityOfStates { n, rows, integral })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_levels() {
        assert!(matches!(extract_surface(2, 1.0, 64), Err(Error::OutsideSpectrum { .. })));
        assert!(matches!(extract_surface(2, -1.2, 64), Err(Error::OutsideSpectrum { .. })));
        match extract_surface(3, 0.3334, 32) {
            Err(Error::NearCritical { critical, .. }) => assert!((critical - 1.0 / 3.0).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
        assert!(extract_surface(1, 0.5, 64).is_err());
    }

    #[test]
    fn nodes_lie_on_the_level() {
        for (n, l) in [(2, 0.3), (2, -0.7), (2, 0.95), (3, 0.1), (3, 0.8), (3, -0.5)] {
            let s = extract_surface(n, l, 32).unwrap();
            assert!(s.max_residual() <= SURFACE_TOL, "{n} {l}");
            assert!(s.weighted_measure() > 0.0);
        }
    }

    #[test]
    fn saddle_level_has_square_length() {
        assert!(extract_surface(2, 0.0, 64).is_err());
        let s = extract_surface_with(2, 0.0, 256, SurfaceMode::Permissive).unwrap();
        let exact = 4.0 * PI * 2f64.sqrt();
        assert!((s.total_measure() - exact).abs() < 0.005 * exact);
    }

    #[test]
    fn circle_limit_near_the_top() {
        let l = 1.0 - 1e-4;
        let s = extract_surface(2, l, 64).unwrap();
        let d = 2.0 * (2.0 * 2.0 * (1.0 - l)).sqrt();
        assert!((s.diameter() / d - 1.0).abs() < 1e-3);
        // circle of radius 2 sqrt(1 - lambda)
        let r = d / 2.0;
        assert!((s.total_measure() / (2.0 * PI * r) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn refinement_moves_measure_little() {
        for (n, l, res) in [(2, 0.3, 64), (3, 0.6, 24)] {
            let s = extract_surface(n, l, res).unwrap();
            let r = s.refined(2).unwrap();
            let change = (r.weighted_measure() / s.weighted_measure() - 1.0).abs();
            assert!(change < 0.005, "{change}");
            assert_eq!(r.len(), s.len() * if n == 2 { 2 } else { 4 });
        }
    }

    #[test]
    fn curvature_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let l: f64 = rng.random_range(0.55..0.99);
            let t: Vec<f64> = (0..2).map(|_| rng.random_range(-2.5..2.5)).collect();
            let a = curvature(&t, l).unwrap();
            let b = curvature_bordered(&t, l).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
        let t3 = [0.4, -1.1, 0.9];
        assert!((curvature(&t3, 0.8).unwrap() - curvature_bordered(&t3, 0.8).unwrap()).abs() < 1e-10);
        assert!(matches!(curvature(&[0.0, 0.0], 0.9), Err(Error::SingularNode { .. })));
    }

    #[test]
    fn round_limit_curvature() {
        let s = extract_surface(2, 1.0 - 1e-4, 64).unwrap();
        let rep = curvature_report(&s).unwrap();
        assert!(rep.spread <= 0.05);
        assert!((rep.min_abs - 0.5).abs() < 0.01);
        assert!(rep.cosine_bound_holds);
    }

    #[test]
    fn slices_are_symmetric_and_positive() {
        let s = extract_surface(2, 0.3, 64).unwrap();
        let g = gamma_lambda(&s, 3).unwrap();
        assert!(g.get(&[0, 0]).unwrap() > 0.0);
        assert!(g.symmetry_defect() < 1e-6, "{}", g.symmetry_defect());
        assert!(!g.flagged);
        assert!(g.get(&[4, 0]).is_none());
    }

    #[test]
    fn band_average_counting() {
        let grid = GridSpec::new(2, 64).unwrap();
        let full = band_average(grid, 0.0, 2.0, 1).unwrap();
        // everything except the single sample with G = -1
        let expect = (1.0 - 1.0 / 4096.0) / 2.0;
        assert!((full.get(&[0, 0]).unwrap() - expect).abs() < 1e-12);
        assert!(band_average(grid, 0.999, 0.0001, 1).is_err());
    }

    #[test]
    fn ladders_are_checked() {
        assert!(n_lambda_fit(2, &[0.3, 0.9], 32).is_err());
        let e = spectral_norm_decay(2, 1.0, &[0.9], SpectralDecayOptions::default());
        assert!(e.is_err());
        assert!(spectral_norm_decay(2, 1.5, &dyadic_ladder(2, 3..8), SpectralDecayOptions::default()).is_err());
    }

    #[test]
    fn restriction_support_rules() {
        let one = MultiplierFunction::constant(1.0, -1.0, 1.0);
        assert!(matches!(restriction_st_check(2, &[8], &one), Err(Error::SupportViolation { .. })));
        let zero = restriction_st_check(2, &[8, 16], &MultiplierFunction::zero()).unwrap();
        assert!(zero.rows.iter().all(|r| r.1 == 0.0) && zero.fit.is_none());
    }

    #[test]
    fn surface_csv_header() {
        let s = extract_surface(2, 0.9, 16).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("element,theta_1,theta_2,area,grad,curvature\n"));
        assert_eq!(text.lines().count(), s.len() + 1);
    }
}
