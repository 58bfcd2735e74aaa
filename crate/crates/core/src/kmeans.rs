//! k-means over entity means: k-means++ seeding followed by Lloyd refinement.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{EntitySeries, TimeSeriesDataset};
use crate::objective::psi_o;
use crate::par;
use crate::rng::{self, Stage};

/// Lloyd stops when the relative cost improvement falls below this.
pub const LLOYD_REL_TOL: f64 = 1e-6;
pub const LLOYD_MAX_ITERS: usize = 100;
pub const DEFAULT_RESTARTS: usize = 3;

/// A set of points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("ragged point rows".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-entity means `b_i`, offsets `a_i` and their total `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntitySummaries {
    pub means: Points,
    pub offsets: Vec<f64>,
    pub total_offset: f64,
}

/// Computes `b_i = mean_t x_it` and `a_i = (1/T_i) sum_t ||x_it||^2 - ||sum_t x_it||^2 / T_i^2`.
///
/// `a_i` is evaluated in its centered form `(1/T_i) sum_t ||x_it - b_i||^2`,
/// which is the same quantity without cancellation.
pub fn entity_summaries(data: &TimeSeriesDataset) -> EntitySummaries {
    let d = data.dim();
    let rows: Vec<(Vec<f64>, f64)> = par::map(data.entities(), |e| {
        let b = entity_mean(e);
        let a = psi_o(e, &b) / e.len() as f64;
        (b, a.max(0.0))
    });
    let mut coords = Vec::with_capacity(rows.len() * d);
    let mut offsets = Vec::with_capacity(rows.len());
    for (b, a) in rows {
        coords.extend_from_slice(&b);
        offsets.push(a);
    }
    let total_offset = offsets.iter().sum();
    EntitySummaries { means: Points { dim: d, coords }, offsets, total_offset }
}

pub fn entity_mean(entity: &EntitySeries) -> Vec<f64> {
    let mut b = vec![0.0; entity.dim()];
    for x in entity.rows() {
        b.iter_mut().zip(x).for_each(|(s, v)| *s += v);
    }
    let n = entity.len() as f64;
    b.iter_mut().for_each(|s| *s /= n);
    b
}

/// Optimal 1-means cost of one entity, `sum_t ||x_it - b_i||^2`.
pub fn one_means_cost(entity: &EntitySeries, mean: &[f64]) -> f64 {
    psi_o(entity, mean)
}

/// Outcome of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Points,
    /// Nearest center per point, ties broken toward the lowest index.
    pub assignment: Vec<usize>,
    /// `sum_i w_i ||b_i - c_{p(i)}||^2`.
    pub cost: f64,
    /// Cost after each assignment step of the winning restart.
    pub trace: Vec<f64>,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Number of points assigned to each center.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Best of `restarts` runs of k-means++ seeding plus Lloyd iterations.
pub fn kmeans_entities(points: &Points, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_weighted(points, None, k, restarts, seed)
}

/// Weighted variant; `weights = None` means unit weights.
pub fn kmeans_weighted(
    points: &Points,
    weights: Option<&[f64]>,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<KMeansResult> {
    let n = points.len();
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument("k-means needs k >= 1 and at least one point".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {n} points")));
    }
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("k-means weights must be finite and nonnegative".into()));
        }
    }
    let unit = vec![1.0; n];
    let weights = weights.unwrap_or(&unit);
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = rng::stream(seed, Stage::KMeans, r as u64);
        let seeds = plus_plus(points, weights, k, &mut rng);
        let run = lloyd(points, weights, seeds);
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sample_index<R: Rng>(mass: &[f64], rng: &mut R) -> usize {
    let total: f64 = mass.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &m) in mass.iter().enumerate() {
        if m <= 0.0 {
            continue;
        }
        acc += m;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

fn plus_plus<R: Rng>(points: &Points, weights: &[f64], k: usize, rng: &mut R) -> Points {
    let n = points.len();
    let d = points.dim();
    let mut coords = Vec::with_capacity(k * d);
    let first = if weights.iter().any(|&w| w > 0.0) {
        sample_index(weights, rng)
    } else {
        rng.random_range(0..n)
    };
    coords.extend_from_slice(points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for _ in 1..k {
        let mass: Vec<f64> = d2.iter().zip(weights).map(|(a, w)| a * w).collect();
        let next = if mass.iter().any(|&m| m > 0.0) {
            sample_index(&mass, rng)
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(next).to_vec();
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(points.row(i), &c));
        }
        coords.extend_from_slice(&c);
    }
    Points { dim: d, coords }
}

fn assign(points: &Points, centers: &Points) -> Vec<(usize, f64)> {
    par::map_range(points.len(), |i| {
        let p = points.row(i);
        let mut best = (0, f64::INFINITY);
        for l in 0..centers.len() {
            let dist = sq_dist(p, centers.row(l));
            if dist < best.1 {
                best = (l, dist);
            }
        }
        best
    })
}

fn lloyd(points: &Points, weights: &[f64], mut centers: Points) -> KMeansResult {
    let k = centers.len();
    let d = points.dim();
    let mut trace = Vec::new();
    let mut iter = 0;
    loop {
        let nearest = assign(points, &centers);
        let cost: f64 = nearest.iter().zip(weights).map(|(&(_, d2), w)| w * d2).sum();
        let done = match trace.last() {
            Some(&prev) => prev - cost <= LLOYD_REL_TOL * prev,
            None => false,
        };
        trace.push(cost);
        iter += 1;
        if done || iter >= LLOYD_MAX_ITERS {
            return KMeansResult {
                centers,
                assignment: nearest.iter().map(|&(l, _)| l).collect(),
                cost,
                trace,
            };
        }

        let mut sums = vec![0.0; k * d];
        let mut mass = vec![0.0; k];
        for (i, &(l, _)) in nearest.iter().enumerate() {
            let w = weights[i];
            mass[l] += w;
            for (s, x) in sums[l * d..(l + 1) * d].iter_mut().zip(points.row(i)) {
                *s += w * x;
            }
        }
        let mut contribution: Vec<f64> = nearest.iter().zip(weights).map(|(&(_, d2), w)| w * d2).collect();
        for l in 0..k {
            let target = &mut centers.coords[l * d..(l + 1) * d];
            if mass[l] > 0.0 {
                for (c, s) in target.iter_mut().zip(&sums[l * d..(l + 1) * d]) {
                    *c = s / mass[l];
                }
            } else {
                // Empty cluster: move it onto the currently worst-served point.
                let mut worst = 0;
                for (i, &c) in contribution.iter().enumerate() {
                    if c > contribution[worst] {
                        worst = i;
                    }
                }
                target.copy_from_slice(points.row(worst));
                contribution[worst] = 0.0;
            }
        }
    }
}
