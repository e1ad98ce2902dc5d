//! Lattice boxes and tori as spaces of homogeneous type: separated nets, the
//! disjoint cells `Q_i(r)`, volume growth and the Schur block test.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::fit::{fit_loglog, DecayFit};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    LInf,
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Domain {
    /// `{0..dims[0]} x ... x {0..dims[n-1]}`.
    Box { dims: Vec<usize> },
    /// `Z_m^n` with periodic distance.
    Torus { n: usize, m: usize },
}

/// Finite lattice point set with a word metric and counting measure.
#[derive(Debug, Clone)]
pub struct MetricModel {
    domain: Domain,
    metric: Metric,
    points: Vec<Vec<i64>>,
}

impl MetricModel {
    pub fn lattice_box(dims: &[usize], metric: Metric) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("box dimensions must be positive".into()));
        }
        let domain = Domain::Box { dims: dims.to_vec() };
        Ok(Self::enumerate(domain, metric))
    }

    pub fn torus(n: usize, m: usize, metric: Metric) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("torus needs n >= 1 and m >= 1".into()));
        }
        Ok(Self::enumerate(Domain::Torus { n, m }, metric))
    }

    fn enumerate(domain: Domain, metric: Metric) -> Self {
        let dims = domain_dims(&domain);
        let total: usize = dims.iter().product();
        let points = (0..total)
            .map(|mut idx| {
                let mut p = vec![0i64; dims.len()];
                for j in (0..dims.len()).rev() {
                    p[j] = (idx % dims[j]) as i64;
                    idx /= dims[j];
                }
                p
            })
            .collect();
        MetricModel { domain, metric, points }
    }

    pub fn dim(&self) -> usize {
        domain_dims(&self.domain).len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.points[i]
    }

    /// Index of a lattice point, if it belongs to the model.
    pub fn index_of(&self, p: &[i64]) -> Option<usize> {
        let dims = domain_dims(&self.domain);
        let mut idx = 0usize;
        for (j, &v) in p.iter().enumerate() {
            let v = match self.domain {
                Domain::Torus { m, .. } => v.rem_euclid(m as i64),
                Domain::Box { .. } => v,
            };
            if v < 0 || v as usize >= dims[j] {
                return None;
            }
            idx = idx * dims[j] + v as usize;
        }
        Some(idx)
    }

    /// Per-coordinate displacement, reduced to the shortest periodic representative on a torus.
    fn offsets(&self, a: &[i64], b: &[i64], out: &mut [i64]) {
        for j in 0..a.len() {
            let mut d = (a[j] - b[j]).abs();
            if let Domain::Torus { m, .. } = self.domain {
                d = d.min(m as i64 - d);
            }
            out[j] = d;
        }
    }

    pub fn dist_points(&self, a: &[i64], b: &[i64]) -> f64 {
        let mut buf = [0i64; 8];
        let off = &mut buf[..a.len()];
        self.offsets(a, b, off);
        norm_of(self.metric, off)
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist_points(&self.points[i], &self.points[j])
    }

    /// `V(x, r) = #{y : d(x, y) < r}` (open ball, counting measure).
    pub fn volume(&self, x: usize, r: f64) -> usize {
        if r <= 0.0 {
            return 0;
        }
        let center = &self.points[x];
        if self.metric == Metric::LInf {
            let reach = r.ceil() as i64 - 1;
            return self.axis_ranges(center, reach).iter().map(|&(lo, hi)| (hi - lo + 1) as usize).product();
        }
        let mut count = 0;
        self.scan(center, r, |_, _| count += 1);
        count
    }

    /// Indices of the open ball `B(x, r)`, sorted.
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if r > 0.0 {
            self.scan(&self.points[x], r, |idx, _| out.push(idx));
        }
        out.sort_unstable();
        out
    }

    /// Per-axis coordinate windows covering the sup-ball of the given reach,
    /// each lattice point represented once.
    fn axis_ranges(&self, center: &[i64], reach: i64) -> Vec<(i64, i64)> {
        let dims = domain_dims(&self.domain);
        center
            .iter()
            .zip(&dims)
            .map(|(&c, &d)| match self.domain {
                Domain::Box { .. } => ((c - reach).max(0), (c + reach).min(d as i64 - 1)),
                Domain::Torus { .. } if 2 * reach + 1 >= d as i64 => (0, d as i64 - 1),
                Domain::Torus { .. } => (c - reach, c + reach),
            })
            .collect()
    }

    /// Calls `f(index, distance)` for every point of the open ball `B(p, r)`.
    fn scan(&self, p: &[i64], r: f64, mut f: impl FnMut(usize, f64)) {
        let reach = r.ceil() as i64 - 1;
        if reach < 0 {
            return;
        }
        let ranges = self.axis_ranges(p, reach);
        if ranges.iter().any(|(lo, hi)| hi < lo) {
            return;
        }
        let n = p.len();
        let mut q: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        let mut off = vec![0i64; n];
        loop {
            self.offsets(p, &q, &mut off);
            let d = norm_of(self.metric, &off);
            if d < r {
                f(self.index_of(&q).expect("scan stays inside the domain"), d);
            }
            let mut j = n;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                if q[j] < ranges[j].1 {
                    q[j] += 1;
                    break;
                }
                q[j] = ranges[j].0;
            }
        }
    }
}

fn domain_dims(domain: &Domain) -> Vec<usize> {
    match domain {
        Domain::Box { dims } => dims.clone(),
        Domain::Torus { n, m } => vec![*m; *n],
    }
}

fn norm_of(metric: Metric, off: &[i64]) -> f64 {
    match metric {
        Metric::LInf => off.iter().map(|v| v.abs()).max().unwrap_or(0) as f64,
        Metric::L1 => off.iter().map(|v| v.abs()).sum::<i64>() as f64,
        Metric::L2 => (off.iter().map(|v| v * v).sum::<i64>() as f64).sqrt(),
    }
}

/// Bucket grid over lattice points for fixed-radius neighbour queries.
///
/// Every metric here dominates the sup-norm, so points within distance `r`
/// lie within `ceil(r / width)` buckets of each other.
struct Buckets {
    width: i64,
    map: HashMap<Vec<i64>, Vec<usize>>,
    periodic: Option<i64>,
}

impl Buckets {
    fn new(model: &MetricModel, width: f64) -> Self {
        let periodic = match model.domain {
            Domain::Torus { m, .. } => Some(m as i64),
            Domain::Box { .. } => None,
        };
        Buckets { width: (width.floor() as i64).max(1), map: HashMap::new(), periodic }
    }

    fn key(&self, p: &[i64]) -> Vec<i64> {
        p.iter().map(|v| v.div_euclid(self.width)).collect()
    }

    fn insert(&mut self, p: &[i64], id: usize) {
        let k = self.key(p);
        self.map.entry(k).or_default().push(id);
    }

    /// Candidate ids within sup-distance `r` of `p` (superset).
    fn candidates(&self, p: &[i64], r: f64) -> Vec<usize> {
        if let Some(m) = self.periodic {
            let buckets_per_axis = (m + self.width - 1) / self.width;
            let reach = (r / self.width as f64).ceil() as i64 + 1;
            if 2 * reach + 1 >= buckets_per_axis {
                let mut all: Vec<usize> = self.map.values().flatten().copied().collect();
                all.sort_unstable();
                return all;
            }
        }
        let reach = (r / self.width as f64).ceil() as i64;
        let base = self.key(p);
        let n = base.len();
        let side = (2 * reach + 1) as usize;
        let mut out = Vec::new();
        let mut k = vec![0i64; n];
        for mut code in 0..side.pow(n as u32) {
            for j in (0..n).rev() {
                k[j] = base[j] + (code % side) as i64 - reach;
                code /= side;
            }
            if let Some(m) = self.periodic {
                let nb = (m + self.width - 1) / self.width;
                for v in k.iter_mut() {
                    *v = v.rem_euclid(nb);
                }
            }
            if let Some(ids) = self.map.get(&k) {
                out.extend_from_slice(ids);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Greedy `r/4`-net in lexicographic point order: centers are pairwise more than
/// `r/4` apart and every point lies within `r/4` of a center.
pub fn build_net(model: &MetricModel, r: f64) -> Result<Vec<usize>> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("net scale must be positive, got {r}")));
    }
    let sep = r / 4.0;
    let mut buckets = Buckets::new(model, sep.max(1.0));
    let mut centers: Vec<usize> = Vec::new();
    for (i, p) in model.points.iter().enumerate() {
        let close = buckets
            .candidates(p, sep)
            .into_iter()
            .any(|c| model.dist_points(p, &model.points[centers[c]]) <= sep);
        if !close {
            buckets.insert(p, centers.len());
            centers.push(i);
        }
    }
    Ok(centers)
}

/// Disjoint cells `Q_i(r)` built from an `r/4`-net.
#[derive(Debug, Clone, Serialize)]
pub struct Partition {
    pub r: f64,
    /// Point index of each center `x_i`.
    pub centers: Vec<usize>,
    /// Cell index of each point.
    pub cell_of: Vec<usize>,
    pub cells: Vec<Vec<usize>>,
    /// Points not reached by any `B(x_i, r/2)` and assigned to their nearest center.
    pub residual: usize,
    /// `min_i |Q_i(r)| / |B(x_i, r)|`.
    pub min_volume_ratio: f64,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Distance weight `eta_l(x) = d(x, x_l) / tau` at every point.
    pub fn eta(&self, model: &MetricModel, ell: usize, tau: f64) -> Vec<f64> {
        let c = self.centers[ell];
        (0..model.len()).map(|x| model.dist(x, c) / tau).collect()
    }

    pub fn center_dist(&self, model: &MetricModel, i: usize, j: usize) -> f64 {
        model.dist(self.centers[i], self.centers[j])
    }
}

/// Assigns every point to one cell:
/// points of `D = U B(x_i, r/4)` go to their nearest center, the rest of
/// `B(x_i, r/2)` to the lowest-index center reaching them, and any residual
/// point to its nearest center.
pub fn build_partition(model: &MetricModel, centers: &[usize], r: f64) -> Result<Partition> {
    if centers.is_empty() {
        return Err(Error::InvalidPartition("no centers".into()));
    }
    let quarter = r / 4.0;
    let mut buckets = Buckets::new(model, quarter.max(1.0));
    for (ci, &p) in centers.iter().enumerate() {
        buckets.insert(&model.points[p], ci);
    }
    for (ci, &p) in centers.iter().enumerate() {
        for cj in buckets.candidates(&model.points[p], quarter) {
            if cj != ci && model.dist(p, centers[cj]) <= quarter {
                return Err(Error::InvalidPartition(format!(
                    "centers {ci} and {cj} are not r/4-separated"
                )));
            }
        }
    }

    let assign: Vec<(usize, bool)> = model
        .points
        .par_iter()
        .map(|p| {
            let cands = buckets.candidates(p, r / 2.0);
            let mut nearest: Option<(f64, usize)> = None;
            let mut first_half: Option<usize> = None;
            for &c in &cands {
                let d = model.dist_points(p, &model.points[centers[c]]);
                if nearest.map_or(true, |(bd, bc)| d < bd || (d == bd && c < bc)) {
                    nearest = Some((d, c));
                }
                if d < r / 2.0 && first_half.map_or(true, |f| c < f) {
                    first_half = Some(c);
                }
            }
            match nearest {
                Some((d, c)) if d < quarter => Ok((c, false)),
                Some((d, _)) if d > quarter && first_half.is_none() => {
                    Err(format!("point {p:?} is farther than r/4 from every center"))
                }
                _ => match first_half {
                    Some(c) => Ok((c, false)),
                    None => nearest.map(|(_, c)| (c, true)).ok_or_else(|| "uncovered point".to_string()),
                },
            }
        })
        .collect::<std::result::Result<_, String>>()
        .map_err(Error::InvalidPartition)?;

    let mut cells = vec![Vec::new(); centers.len()];
    let mut cell_of = Vec::with_capacity(model.len());
    let mut residual = 0;
    for (x, &(c, res)) in assign.iter().enumerate() {
        cells[c].push(x);
        cell_of.push(c);
        residual += res as usize;
    }
    let min_volume_ratio = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| cell.len() as f64 / model.volume(centers[i], r) as f64)
        .reduce(|| f64::INFINITY, f64::min);
    Ok(Partition { r, centers: centers.to_vec(), cell_of, cells, residual, min_volume_ratio })
}

/// Exhaustive postcondition check of a partition.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PartitionAudit {
    pub points: usize,
    pub cells: usize,
    /// Points listed in no cell or in more than one.
    pub overlap_or_gap: usize,
    /// Points of `Q_i` outside `B(x_i, r)`.
    pub outside_ball: usize,
    /// Points of `B(x_i, r/8)` not in `Q_i` (always contained, by separation).
    pub eighth_ball_missing: usize,
    /// Points of `B(x_i, r/4)` not in `Q_i`; zero whenever those balls are disjoint.
    pub quarter_ball_missing: usize,
    /// Center pairs at distance `<= r/4`.
    pub separation_violations: usize,
    /// Points farther than `r/4` from every center.
    pub covering_violations: usize,
    pub min_volume_ratio: f64,
}

impl PartitionAudit {
    pub fn violations(&self) -> usize {
        self.overlap_or_gap
            + self.outside_ball
            + self.eighth_ball_missing
            + self.separation_violations
            + self.covering_violations
    }
}

pub fn audit_partition(model: &MetricModel, part: &Partition) -> PartitionAudit {
    let r = part.r;
    let mut hits = vec![0u32; model.len()];
    for cell in &part.cells {
        for &x in cell {
            hits[x] += 1;
        }
    }
    let overlap_or_gap = hits.iter().filter(|&&h| h != 1).count()
        + part.cell_of.iter().enumerate().filter(|(x, &c)| !part.cells[c].contains(x)).count();

    let per_cell: Vec<(usize, usize, usize)> = part
        .cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let c = part.centers[i];
            let outside = cell.iter().filter(|&&x| model.dist(x, c) >= r).count();
            let eighth = model.ball(c, r / 8.0).into_iter().filter(|&x| part.cell_of[x] != i).count();
            let quarter = model.ball(c, r / 4.0).into_iter().filter(|&x| part.cell_of[x] != i).count();
            (outside, eighth, quarter)
        })
        .collect();

    let mut buckets = Buckets::new(model, (r / 4.0).max(1.0));
    for (ci, &p) in part.centers.iter().enumerate() {
        buckets.insert(&model.points[p], ci);
    }
    let separation_violations = part
        .centers
        .par_iter()
        .enumerate()
        .map(|(ci, &p)| {
            buckets
                .candidates(&model.points[p], r / 4.0)
                .into_iter()
                .filter(|&cj| cj > ci && model.dist(p, part.centers[cj]) <= r / 4.0)
                .count()
        })
        .sum();
    let covering_violations = model
        .points
        .par_iter()
        .filter(|p| {
            !buckets
                .candidates(p, r / 4.0)
                .into_iter()
                .any(|c| model.dist_points(p, &model.points[part.centers[c]]) <= r / 4.0)
        })
        .count();

    PartitionAudit {
        points: model.len(),
        cells: part.len(),
        overlap_or_gap,
        outside_ball: per_cell.iter().map(|v| v.0).sum(),
        eighth_ball_missing: per_cell.iter().map(|v| v.1).sum(),
        quarter_ball_missing: per_cell.iter().map(|v| v.2).sum(),
        separation_violations,
        covering_violations,
        min_volume_ratio: part.min_volume_ratio,
    }
}

/// Fits `V(x, r) ~ C r^{n_hom}` at the point `x` over the given radii.
pub fn doubling_fit(model: &MetricModel, x: usize, radii: &[f64]) -> Result<DecayFit> {
    let mut rs: Vec<f64> = radii.to_vec();
    rs.sort_by(|a, b| a.total_cmp(b));
    rs.dedup();
    if rs.len() < 4 {
        return Err(Error::Degenerate(format!("need >= 4 distinct radii, got {}", rs.len())));
    }
    if rs[rs.len() - 1] / rs[0] < 8.0 {
        return Err(Error::Degenerate("radii must span a factor >= 8".into()));
    }
    if rs[rs.len() - 1] <= 1.0 {
        return Err(Error::Degenerate("all radii are below the lattice spacing".into()));
    }
    let vols: Vec<f64> = rs.iter().map(|&r| model.volume(x, r) as f64).collect();
    fit_loglog(&rs, &vols)
}

/// `max_r V(x, 2r) / V(x, r)` over the given radii.
pub fn doubling_constant(model: &MetricModel, x: usize, radii: &[f64]) -> f64 {
    radii
        .iter()
        .map(|&r| model.volume(x, 2.0 * r) as f64 / model.volume(x, r).max(1) as f64)
        .fold(0.0, f64::max)
}

/// Annulus counts `#{i : 2^k tau <= d(x_i, x_j) < 2^{k+1} tau}` against `2^{kn}`.
#[derive(Debug, Clone, Serialize)]
pub struct BallCountReport {
    pub tau: f64,
    /// `(k, max_j count, max_j count / 2^{kn})`.
    pub rows: Vec<(u32, usize, f64)>,
    /// Largest normalised count.
    pub constant: f64,
    /// Pairs `(j, k)` violating the packing bound
    /// `sum_i V(x_i, tau/8) <= V(x_j, 2^{k+1} tau + tau/8)` over the annulus.
    pub volume_bound_violations: usize,
    /// Normalised counts increased by more than the doubling factor between the
    /// last two populated annuli.
    pub unbounded_growth: bool,
}

pub fn ball_count_check(model: &MetricModel, part: &Partition, tau: f64, k_max: u32) -> BallCountReport {
    let n = model.dim() as i32;
    let centers = &part.centers;
    let small: Vec<usize> = centers.par_iter().map(|&c| model.volume(c, tau / 8.0)).collect();
    let slots = k_max as usize + 1;
    let edges: Vec<f64> = (0..=slots).map(|k| tau * 2f64.powi(k as i32)).collect();
    let per_center: Vec<(Vec<usize>, usize)> = (0..centers.len())
        .into_par_iter()
        .map(|j| {
            let mut counts = vec![0usize; slots];
            let mut packed = vec![0usize; slots];
            let pj = model.point(centers[j]);
            for (i, &ci) in centers.iter().enumerate() {
                let d = model.dist_points(model.point(ci), pj);
                if d < tau || d >= edges[slots] {
                    continue;
                }
                let k = edges.partition_point(|&e| e <= d) - 1;
                counts[k] += 1;
                packed[k] += small[i];
            }
            // the balls B(x_i, tau/8) are disjoint and fit inside B(x_j, 2^{k+1} tau + tau/8)
            let violations = (0..slots)
                .filter(|&k| {
                    counts[k] > 0
                        && packed[k] > model.volume(centers[j], edges[k + 1] + tau / 8.0)
                })
                .count();
            (counts, violations)
        })
        .collect();
    let mut rows = Vec::new();
    for k in 0..=k_max {
        let max = per_center.iter().map(|(c, _)| c[k as usize]).max().unwrap_or(0);
        rows.push((k, max, max as f64 / 2f64.powi(k as i32 * n)));
    }
    let constant = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let populated: Vec<f64> = rows.iter().filter(|r| r.1 > 0).map(|r| r.2).collect();
    let unbounded_growth = populated.len() >= 2
        && populated[populated.len() - 1] > populated[populated.len() - 2] * 2f64.powi(n);
    BallCountReport {
        tau,
        rows,
        constant,
        volume_bound_violations: per_center.iter().map(|(_, v)| v).sum(),
        unbounded_growth,
    }
}

/// Schur-type bound `sup_j sum_i a_ij + sup_i sum_j a_ij` on `||T||_{p->q}` from
/// block norms `a_ij = ||P_{Q_i} T P_{Q_j}||_{p->q}`.
pub fn schur_bound(block_norms: &DMatrix<f64>, p: f64, q: f64) -> Result<f64> {
    if p > q {
        return Err(Error::UnsupportedExponents { p, q, reason: "Schur test needs p <= q".into() });
    }
    if block_norms.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("block norms must be nonnegative".into()));
    }
    let col = block_norms.column_iter().map(|c| c.sum()).fold(0.0, f64::max);
    let row = block_norms.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    Ok(col + row)
}

/// Exact `p -> q` norm of a dense real matrix for the finitely computable pairs
/// `(1,1), (inf,inf), (2,2), (1,2), (1,inf), (2,inf)`.
pub fn dense_norm(t: &DMatrix<f64>, p: f64, q: f64) -> Result<f64> {
    if t.nrows() == 0 || t.ncols() == 0 {
        return Ok(0.0);
    }
    let inf = f64::INFINITY;
    Ok(match (p, q) {
        (p, q) if p == 1.0 && q == 1.0 => t.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max),
        (p, q) if p == inf && q == inf => t.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max),
        (p, q) if p == 2.0 && q == 2.0 => t.clone().singular_values().max(),
        (p, q) if p == 1.0 && q == 2.0 => t.column_iter().map(|c| c.norm()).fold(0.0, f64::max),
        (p, q) if p == 1.0 && q == inf => t.amax(),
        (p, q) if p == 2.0 && q == inf => t.row_iter().map(|r| r.norm()).fold(0.0, f64::max),
        _ => {
            return Err(Error::UnsupportedExponents {
                p,
                q,
                reason: "no finite formula for this pair".into(),
            })
        }
    })
}

/// Matrix of exact block norms `||P_{Q_i} T P_{Q_j}||_{p->q}` of a dense operator.
pub fn block_norms_dense(t: &DMatrix<f64>, part: &Partition, p: f64, q: f64) -> Result<DMatrix<f64>> {
    let k = part.len();
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let rows = &part.cells[i];
            let cols = &part.cells[j];
            let block = DMatrix::from_fn(rows.len(), cols.len(), |a, b| t[(rows[a], cols[b])]);
            out[(i, j)] = dense_norm(&block, p, q)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_net_ok(model: &MetricModel, centers: &[usize], r: f64) -> bool {
        let sep = centers.iter().enumerate().all(|(a, &ca)| {
            centers[a + 1..].iter().all(|&cb| model.dist(ca, cb) > r / 4.0)
        });
        let cover = (0..model.len()).all(|x| centers.iter().any(|&c| model.dist(x, c) <= r / 4.0));
        sep && cover
    }

    #[test]
    fn net_on_a_line() {
        let model = MetricModel::lattice_box(&[100], Metric::LInf).unwrap();
        let centers = build_net(&model, 4.0).unwrap();
        assert!(brute_net_ok(&model, &centers, 4.0));
        for w in centers.windows(2) {
            let gap = model.dist(w[0], w[1]);
            assert!((1.0..=2.0).contains(&gap) && gap > 1.0);
        }
    }

    #[test]
    fn tiny_scale_and_single_point() {
        let model = MetricModel::lattice_box(&[5, 4], Metric::L2).unwrap();
        assert_eq!(build_net(&model, 0.5).unwrap().len(), 20);
        let one = MetricModel::lattice_box(&[1], Metric::L1).unwrap();
        let c = build_net(&one, 3.0).unwrap();
        assert_eq!(c, vec![0]);
        let part = build_partition(&one, &c, 3.0).unwrap();
        assert_eq!(part.cells, vec![vec![0]]);
        assert!(build_net(&model, 0.0).is_err());
    }

    #[test]
    fn nets_match_brute_force_in_every_metric() {
        for metric in [Metric::LInf, Metric::L1, Metric::L2] {
            for r in [3.0, 4.0, 8.0, 13.0] {
                let model = MetricModel::lattice_box(&[23, 17], metric).unwrap();
                let c = build_net(&model, r).unwrap();
                assert!(brute_net_ok(&model, &c, r), "{metric:?} r={r}");
                let t = MetricModel::torus(2, 20, metric).unwrap();
                let c = build_net(&t, r).unwrap();
                assert!(brute_net_ok(&t, &c, r), "torus {metric:?} r={r}");
            }
        }
    }

    #[test]
    fn partition_of_200_points() {
        let model = MetricModel::lattice_box(&[200], Metric::LInf).unwrap();
        let c = build_net(&model, 8.0).unwrap();
        let part = build_partition(&model, &c, 8.0).unwrap();
        let audit = audit_partition(&model, &part);
        assert_eq!(audit.violations(), 0, "{audit:?}");
        assert_eq!(audit.quarter_ball_missing, 0);
        assert_eq!(part.cells.iter().map(|c| c.len()).sum::<usize>(), 200);
        assert!(part.min_volume_ratio > 0.0);
    }

    #[test]
    fn rejects_unseparated_centers() {
        let model = MetricModel::lattice_box(&[20], Metric::LInf).unwrap();
        assert!(build_partition(&model, &[0, 1, 5, 10, 15], 8.0).is_err());
    }

    #[test]
    fn doubling_dimension() {
        let z2 = MetricModel::lattice_box(&[257, 257], Metric::LInf).unwrap();
        let mid = z2.index_of(&[128, 128]).unwrap();
        let radii = [4.0, 8.0, 16.0, 32.0, 64.0, 128.0];
        let fit = doubling_fit(&z2, mid, &radii).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.1, "{}", fit.exponent);
        let z1 = MetricModel::lattice_box(&[1001], Metric::LInf).unwrap();
        let fit = doubling_fit(&z1, 500, &radii).unwrap();
        assert!((fit.exponent - 1.0).abs() < 0.1);
        assert!(doubling_fit(&z1, 500, &[4.0, 4.0, 4.0, 4.0]).is_err());
        assert!(doubling_fit(&z1, 500, &[0.1, 0.2, 0.5, 0.9]).is_err());
    }

    #[test]
    fn ball_volume_matches_closed_form() {
        let z2 = MetricModel::lattice_box(&[41, 41], Metric::LInf).unwrap();
        let mid = z2.index_of(&[20, 20]).unwrap();
        for r in [1.0, 2.5, 7.0] {
            let closed = (2.0 * (r as f64 - 1e-9).floor() + 1.0).powi(2) as usize;
            assert_eq!(z2.volume(mid, r), closed);
        }
    }

    #[test]
    fn annulus_counts_in_one_dimension_grow_linearly() {
        let model = MetricModel::lattice_box(&[512], Metric::LInf).unwrap();
        let c = build_net(&model, 4.0).unwrap();
        let part = build_partition(&model, &c, 4.0).unwrap();
        let rep = ball_count_check(&model, &part, 4.0, 5);
        assert_eq!(rep.volume_bound_violations, 0);
        assert!(!rep.unbounded_growth);
        for w in rep.rows.windows(2) {
            let ratio = w[1].1 as f64 / w[0].1 as f64;
            assert!((1.8..=2.2).contains(&ratio), "{:?}", rep.rows);
        }
        let far = ball_count_check(&model, &part, 4.0, 8);
        assert_eq!(far.rows[7].1, 0);
    }

    #[test]
    fn schur_bound_trivial_cases() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(schur_bound(&id, 2.0, 2.0).unwrap(), 2.0);
        let blocks = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 3.0, 1.0]));
        assert_eq!(schur_bound(&blocks, 1.0, 2.0).unwrap(), 6.0);
        assert!(schur_bound(&id, 2.0, 1.0).is_err());
    }

    #[test]
    fn schur_dominates_dense_norm() {
        let model = MetricModel::lattice_box(&[30], Metric::LInf).unwrap();
        let c = build_net(&model, 40.0).unwrap();
        let part = build_partition(&model, &c, 40.0).unwrap();
        assert_eq!(part.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let t = DMatrix::from_fn(30, 30, |_, _| rng.random_range(-1.0..1.0));
            let blocks = block_norms_dense(&t, &part, 2.0, 2.0).unwrap();
            let bound = schur_bound(&blocks, 2.0, 2.0).unwrap();
            assert!(bound >= dense_norm(&t, 2.0, 2.0).unwrap());
        }
    }
}
