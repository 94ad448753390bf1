//! k-means variants and centroid routing.
//!
//! Standard k-means assigns by squared Euclidean distance. Spherical k-means
//! assigns by largest inner product and keeps unit-norm centroids. Balanced
//! k-means adds a capacity constraint so that cluster sizes differ by at most
//! `delta`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, normalize, squared_l2, DenseMatrix};
use crate::metric::Metric;

pub const DEFAULT_MAX_ITERS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterMetric {
    Euclidean,
    Spherical,
}

impl From<Metric> for ClusterMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Euclidean => ClusterMetric::Euclidean,
            Metric::InnerProduct | Metric::Cosine => ClusterMetric::Spherical,
        }
    }
}

impl ClusterMetric {
    /// Lower is closer.
    #[inline]
    fn cost(self, x: &[f32], centroid: &[f32]) -> f32 {
        match self {
            ClusterMetric::Euclidean => squared_l2(x, centroid),
            ClusterMetric::Spherical => -dot(x, centroid),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub centroids: DenseMatrix,
    pub assignments: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Objective after each centroid update: total squared distance
    /// (Euclidean) or total negated inner product (spherical).
    pub distortion_history: Vec<f64>,
}

impl Clustering {
    pub fn num_clusters(&self) -> usize {
        self.sizes.len()
    }

    /// Point ids of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// Nearest centroid and its cost; ties go to the lower id.
#[inline]
fn nearest(x: &[f32], centroids: &DenseMatrix, metric: ClusterMetric) -> (usize, f32) {
    let mut best = (0usize, f32::INFINITY);
    for (l, c) in centroids.row_iter().enumerate() {
        let cost = metric.cost(x, c);
        if cost < best.1 {
            best = (l, cost);
        }
    }
    best
}

fn check_inputs(points: &DenseMatrix, clusters: usize) -> Result<()> {
    if clusters == 0 || clusters > points.rows() {
        return Err(Error::param(format!(
            "cannot form {clusters} clusters from {} points",
            points.rows()
        )));
    }
    if !points.is_finite() {
        return Err(Error::Data("clustering input contains non-finite values".into()));
    }
    Ok(())
}

pub fn kmeans(
    points: &DenseMatrix,
    clusters: usize,
    metric: ClusterMetric,
    max_iters: usize,
    seed: u64,
) -> Result<Clustering> {
    check_inputs(points, clusters)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, clusters, metric, &mut rng);
    let mut assignments = vec![usize::MAX; points.rows()];
    let mut history = Vec::new();

    for _ in 0..max_iters.max(1) {
        let next: Vec<usize> = (0..points.rows())
            .into_par_iter()
            .map(|i| nearest(points.row(i), &centroids, metric).0)
            .collect();
        let changed = next != assignments;
        assignments = next;
        let mut sizes = count_sizes(&assignments, clusters);
        repair_empty(points, &mut centroids, &mut assignments, &mut sizes, metric);
        centroids = update_centroids(points, &assignments, &sizes, &centroids, metric);
        history.push(distortion(points, &centroids, &assignments, metric));
        if !changed {
            break;
        }
    }
    let sizes = count_sizes(&assignments, clusters);
    Ok(Clustering {
        centroids,
        assignments,
        sizes,
        distortion_history: history,
    })
}

/// Size window `[lo, hi]` with `hi - lo <= delta`, `lo >= 1`, that always
/// admits a feasible assignment of `m` points to `clusters` clusters.
pub fn balance_bounds(m: usize, clusters: usize, delta: usize) -> (usize, usize) {
    let base = m / clusters;
    let hi = base + delta.div_ceil(2);
    let lo = hi.saturating_sub(delta).max(1);
    (lo, hi)
}

pub fn balanced_kmeans(
    points: &DenseMatrix,
    clusters: usize,
    metric: ClusterMetric,
    delta: usize,
    max_iters: usize,
    seed: u64,
) -> Result<Clustering> {
    check_inputs(points, clusters)?;
    if delta == 0 {
        return Err(Error::param("balance tolerance delta must be at least 1"));
    }
    let m = points.rows();
    let (lo, hi) = balance_bounds(m, clusters, delta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, clusters, metric, &mut rng);
    let mut assignments = vec![usize::MAX; m];
    let mut history = Vec::new();

    for _ in 0..max_iters.max(1) {
        let costs: Vec<Vec<f32>> = (0..m)
            .into_par_iter()
            .map(|i| centroids.row_iter().map(|c| metric.cost(points.row(i), c)).collect())
            .collect();
        let next = capacitated_assignment(&costs, clusters, lo, hi);
        let changed = next != assignments;
        assignments = next;
        let sizes = count_sizes(&assignments, clusters);
        centroids = update_centroids(points, &assignments, &sizes, &centroids, metric);
        history.push(distortion(points, &centroids, &assignments, metric));
        if !changed {
            break;
        }
    }
    let sizes = count_sizes(&assignments, clusters);
    debug_assert!(sizes.iter().all(|&s| (lo..=hi).contains(&s)));
    Ok(Clustering {
        centroids,
        assignments,
        sizes,
        distortion_history: history,
    })
}

/// Nearest-centroid assignment, then overflow of full clusters to the nearest
/// cluster with room, then underfull clusters pull their cheapest points from
/// clusters that can spare them.
fn capacitated_assignment(costs: &[Vec<f32>], clusters: usize, lo: usize, hi: usize) -> Vec<usize> {
    let m = costs.len();
    let argmin = |row: &[f32]| {
        row.iter()
            .enumerate()
            .fold((0usize, f32::INFINITY), |b, (l, &c)| if c < b.1 { (l, c) } else { b })
            .0
    };
    let mut assignments: Vec<usize> = costs.iter().map(|r| argmin(r)).collect();
    let mut sizes = count_sizes(&assignments, clusters);

    // Overflow: each full cluster keeps its `hi` closest points.
    let mut overflow = Vec::new();
    for l in 0..clusters {
        if sizes[l] <= hi {
            continue;
        }
        let mut members: Vec<usize> = (0..m).filter(|&i| assignments[i] == l).collect();
        members.sort_by(|&a, &b| costs[a][l].total_cmp(&costs[b][l]).then(a.cmp(&b)));
        overflow.extend_from_slice(&members[hi..]);
        sizes[l] = hi;
    }
    overflow.sort_unstable();
    for i in overflow {
        let mut order: Vec<usize> = (0..clusters).collect();
        order.sort_by(|&a, &b| costs[i][a].total_cmp(&costs[i][b]).then(a.cmp(&b)));
        let target = order
            .into_iter()
            .find(|&l| sizes[l] < hi)
            .expect("total capacity covers all points");
        assignments[i] = target;
        sizes[target] += 1;
    }

    // Fill: underfull clusters take the points that are cheapest to move.
    for u in 0..clusters {
        if sizes[u] >= lo {
            continue;
        }
        let mut candidates: Vec<(f32, usize)> = (0..m)
            .filter(|&i| assignments[i] != u)
            .map(|i| (costs[i][u] - costs[i][assignments[i]], i))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, i) in candidates {
            if sizes[u] >= lo {
                break;
            }
            let from = assignments[i];
            if sizes[from] > lo {
                sizes[from] -= 1;
                sizes[u] += 1;
                assignments[i] = u;
            }
        }
    }
    assignments
}

fn count_sizes(assignments: &[usize], clusters: usize) -> Vec<usize> {
    let mut sizes = vec![0usize; clusters];
    for &a in assignments {
        sizes[a] += 1;
    }
    sizes
}

/// k-means++ seeding with squared-distance weights.
fn plus_plus_init(
    points: &DenseMatrix,
    clusters: usize,
    metric: ClusterMetric,
    rng: &mut ChaCha8Rng,
) -> DenseMatrix {
    let m = points.rows();
    let mut chosen = vec![false; m];
    let mut picks = Vec::with_capacity(clusters);
    let first = rng.random_range(0..m);
    picks.push(first);
    chosen[first] = true;
    let mut d2: Vec<f64> = (0..m)
        .map(|i| f64::from(squared_l2(points.row(i), points.row(first))))
        .collect();

    // greedy variant: draw a few D²-weighted candidates, keep the one that
    // lowers the potential most
    let trials = 2 + (clusters as f64).ln().floor() as usize;
    while picks.len() < clusters {
        let total: f64 = d2.iter().sum();
        let mut candidates = Vec::with_capacity(trials);
        if total > 0.0 {
            for _ in 0..trials {
                if let Some(i) = sample_weighted(&d2, total, rng) {
                    if !chosen[i] && !candidates.contains(&i) {
                        candidates.push(i);
                    }
                }
            }
        }
        if candidates.is_empty() {
            candidates.push((0..m).find(|&i| !chosen[i]).expect("clusters <= points"));
        }
        let (pick, next_d2) = candidates
            .iter()
            .map(|&c| {
                let p = points.row(c);
                let updated: Vec<f64> = d2
                    .par_iter()
                    .enumerate()
                    .map(|(i, &w)| w.min(f64::from(squared_l2(points.row(i), p))))
                    .collect();
                (c, updated)
            })
            .min_by(|a, b| {
                let (sa, sb): (f64, f64) = (a.1.iter().sum(), b.1.iter().sum());
                sa.total_cmp(&sb).then(a.0.cmp(&b.0))
            })
            .expect("at least one candidate");
        chosen[pick] = true;
        picks.push(pick);
        d2 = next_d2;
    }

    let mut centroids = points.select_rows(&picks);
    if metric == ClusterMetric::Spherical {
        for l in 0..clusters {
            normalize(centroids.row_mut(l));
        }
    }
    centroids
}

fn sample_weighted(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> Option<usize> {
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        target -= w;
        if target <= 0.0 {
            return Some(i);
        }
    }
    // rounding can leave a sliver of mass past the last positive weight
    weights.iter().rposition(|&w| w > 0.0)
}

/// Moves the farthest point of the largest cluster into each empty cluster.
fn repair_empty(
    points: &DenseMatrix,
    centroids: &mut DenseMatrix,
    assignments: &mut [usize],
    sizes: &mut [usize],
    metric: ClusterMetric,
) {
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let largest = (0..sizes.len())
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .expect("at least one cluster");
        let mut far = (usize::MAX, f32::NEG_INFINITY);
        for (i, &a) in assignments.iter().enumerate() {
            if a == largest {
                let c = metric.cost(points.row(i), centroids.row(largest));
                if c > far.1 {
                    far = (i, c);
                }
            }
        }
        let i = far.0;
        assignments[i] = empty;
        sizes[largest] -= 1;
        sizes[empty] += 1;
        let row = centroids.row_mut(empty);
        row.copy_from_slice(points.row(i));
        if metric == ClusterMetric::Spherical {
            normalize(row);
        }
    }
}

fn update_centroids(
    points: &DenseMatrix,
    assignments: &[usize],
    sizes: &[usize],
    previous: &DenseMatrix,
    metric: ClusterMetric,
) -> DenseMatrix {
    let (clusters, d) = (sizes.len(), points.cols());
    let mut sums = vec![0.0f64; clusters * d];
    for (i, &a) in assignments.iter().enumerate() {
        for (s, &v) in sums[a * d..(a + 1) * d].iter_mut().zip(points.row(i)) {
            *s += f64::from(v);
        }
    }
    let mut out = DenseMatrix::zeros(clusters, d);
    for l in 0..clusters {
        let row = out.row_mut(l);
        if sizes[l] == 0 {
            row.copy_from_slice(previous.row(l));
            continue;
        }
        let inv = 1.0 / sizes[l] as f64;
        for (o, &s) in row.iter_mut().zip(&sums[l * d..(l + 1) * d]) {
            *o = (s * inv) as f32;
        }
        if metric == ClusterMetric::Spherical {
            normalize(row);
        }
    }
    out
}

fn distortion(
    points: &DenseMatrix,
    centroids: &DenseMatrix,
    assignments: &[usize],
    metric: ClusterMetric,
) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &a)| f64::from(metric.cost(points.row(i), centroids.row(a))))
        .sum()
}

/// Ids of the `w` closest centroids, best first, ties to the lower id.
pub fn route(query: &[f32], centroids: &DenseMatrix, w: usize, metric: ClusterMetric) -> Result<Vec<usize>> {
    let total = centroids.rows();
    if w == 0 || w > total {
        return Err(Error::param(format!("cannot probe {w} of {total} clusters")));
    }
    if query.len() != centroids.cols() {
        return Err(Error::shape(format!(
            "query of dimension {} routed against {}-dimensional centroids",
            query.len(),
            centroids.cols()
        )));
    }
    Ok(route_unchecked(query, centroids, w, metric))
}

pub(crate) fn route_unchecked(
    query: &[f32],
    centroids: &DenseMatrix,
    w: usize,
    metric: ClusterMetric,
) -> Vec<usize> {
    let mut scored: Vec<(f32, usize)> = centroids
        .row_iter()
        .enumerate()
        .map(|(l, c)| (metric.cost(query, c), l))
        .collect();
    let cmp = |a: &(f32, usize), b: &(f32, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if w < scored.len() {
        scored.select_nth_unstable_by(w - 1, cmp);
        scored.truncate(w);
    }
    scored.sort_unstable_by(cmp);
    scored.into_iter().map(|(_, l)| l).collect()
}
