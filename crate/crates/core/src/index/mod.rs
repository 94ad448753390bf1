//! End-to-end index: build, query and persistence.

mod format;

use std::path::Path;

use rayon::prelude::*;

use crate::cluster::{balanced_kmeans, kmeans, route_unchecked, ClusterMetric, DEFAULT_MAX_ITERS};
use crate::error::{Error, Result};
use crate::linalg::{
    dot, matmul, normalize, random_rotation, squared_norm, top_eigenvectors, vecmat_into,
    DenseMatrix,
};
use crate::metric::Metric;
use crate::rrr::{
    routed_training_sets, score_cluster, train_cluster, ClusterBlock, ClusterModel, LocalTrain,
    RrrConfig, TrainSource, TrainingBlock,
};

pub use format::Footprint;

/// How candidates inside probed clusters are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoringMode {
    /// Reduced-rank regression models.
    Rrr,
    /// Exact inner products against the stored cluster members (plain IVF).
    ExactIvf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexConfig {
    pub metric: Metric,
    pub clusters: usize,
    pub rrr: RrrConfig,
    pub scoring_mode: ScoringMode,
    /// Balanced clustering with this maximum size difference.
    pub balance: Option<usize>,
    /// Keep the original vectors so queries can re-rank candidates.
    pub rerank: bool,
    pub kmeans_iters: usize,
    pub seed: u64,
}

/// Cluster counts searched by the reference grid; used once the corpus is
/// large enough to give each cluster a few dozen points.
const CLUSTER_GRID: [usize; 3] = [1024, 2048, 4096];
const MIN_POINTS_PER_GRID_CLUSTER: usize = 39;

impl IndexConfig {
    /// Defaults for a corpus of the given shape.
    pub fn for_corpus(metric: Metric, corpus: &DenseMatrix) -> Self {
        Self::with_defaults(metric, corpus.rows(), corpus.cols())
    }

    pub fn with_defaults(metric: Metric, points: usize, dim: usize) -> Self {
        let reduced_dim = Self::default_reduced_dim(dim);
        let rank = crate::rrr::DEFAULT_RANK.min(reduced_dim.unwrap_or(dim));
        Self {
            metric,
            clusters: Self::default_clusters(points),
            rrr: RrrConfig {
                rank,
                reduced_dim,
                ..RrrConfig::default()
            },
            scoring_mode: ScoringMode::Rrr,
            balance: None,
            rerank: true,
            kmeans_iters: DEFAULT_MAX_ITERS,
            seed: 0,
        }
    }

    /// Largest grid value with enough points per cluster, else `round(√m)`.
    pub fn default_clusters(points: usize) -> usize {
        CLUSTER_GRID
            .iter()
            .rev()
            .copied()
            .find(|&l| l * MIN_POINTS_PER_GRID_CLUSTER <= points)
            .unwrap_or_else(|| ((points as f64).sqrt().round() as usize).max(1))
    }

    pub fn default_reduced_dim(dim: usize) -> Option<usize> {
        match dim {
            0..=64 => None,
            65..=128 => Some(64),
            _ => Some(128),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.rrr.seed = seed;
        self
    }

    fn validate(&self, points: usize, dim: usize) -> Result<()> {
        if self.clusters == 0 || self.clusters > points {
            return Err(Error::param(format!(
                "cannot form {} clusters from {points} points",
                self.clusters
            )));
        }
        if self.balance == Some(0) {
            return Err(Error::param("balance tolerance must be at least 1"));
        }
        if self.scoring_mode == ScoringMode::Rrr {
            self.rrr.validate(dim)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryParams {
    pub k: usize,
    /// Clusters to probe.
    pub w: usize,
    /// Candidates kept after scoring.
    pub t: usize,
    pub rerank: bool,
}

impl QueryParams {
    pub fn new(k: usize, w: usize, t: usize) -> Self {
        Self {
            k,
            w,
            t,
            rerank: true,
        }
    }

    pub fn without_rerank(mut self) -> Self {
        self.rerank = false;
        self
    }
}

/// Nearest neighbors, best first. Scores are dissimilarities (lower is
/// closer): squared Euclidean distance, negative inner product, or
/// `1 - cos`. Without re-ranking they are the model's estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub ids: Vec<usize>,
    pub scores: Vec<f32>,
    /// Fewer than `k` candidates were reachable with the given `w` and `t`.
    pub underfilled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ClusterSlot {
    Model(ClusterModel),
    Exact {
        ids: Vec<usize>,
        norms: Option<Vec<f32>>,
    },
}

impl ClusterSlot {
    fn ids(&self) -> &[usize] {
        match self {
            ClusterSlot::Model(m) => &m.point_ids,
            ClusterSlot::Exact { ids, .. } => ids,
        }
    }
}

/// Flags describing how an index was built; mirrored in the file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexLayout {
    pub metric: Metric,
    pub dim: usize,
    /// Dimension of projected queries and centroids.
    pub input_dim: usize,
    pub rank: usize,
    pub num_points: usize,
    pub quantized: bool,
    pub mixed_precision: bool,
    pub balanced: bool,
    pub scoring_mode: ScoringMode,
    pub identity_projection: bool,
}

/// Immutable index; safe to query from many threads.
#[derive(Debug, Clone, PartialEq)]
pub struct RrrIndex {
    layout: IndexLayout,
    /// Build configuration, when the index was built in this process.
    config: Option<IndexConfig>,
    /// `dim x input_dim`; queries are projected as `x̃ = Pᵀx`.
    projection: DenseMatrix,
    centroids: DenseMatrix,
    clusters: Vec<ClusterSlot>,
    corpus: Option<DenseMatrix>,
}

fn seed_for(base: u64, stream: u64) -> u64 {
    base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Random rotation, optionally fixing the first axis so a leading principal
/// component stays in place for mixed-precision handling.
fn preconditioner(dim: usize, keep_first: bool, seed: u64) -> DenseMatrix {
    if !keep_first || dim <= 1 {
        return random_rotation(dim, seed);
    }
    let inner = random_rotation(dim - 1, seed);
    DenseMatrix::from_fn(dim, dim, |i, j| match (i, j) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => inner.get(i - 1, j - 1),
    })
}

fn normalized_rows(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        normalize(out.row_mut(i));
    }
    out
}

impl RrrIndex {
    /// Builds an index. `train` is a sample from the query distribution and
    /// must be given exactly when `cfg.rrr.train_source` is `QuerySample`.
    pub fn build(corpus: &DenseMatrix, train: Option<&DenseMatrix>, cfg: &IndexConfig) -> Result<Self> {
        let (m, d) = (corpus.rows(), corpus.cols());
        if m == 0 || d == 0 {
            return Err(Error::param("corpus is empty"));
        }
        if !corpus.is_finite() {
            return Err(Error::Data("corpus contains non-finite values".into()));
        }
        cfg.validate(m, d)?;
        let rrr_mode = cfg.scoring_mode == ScoringMode::Rrr;

        let train = match (cfg.rrr.train_source, train) {
            (TrainSource::QuerySample, Some(t)) => {
                if t.cols() != d {
                    return Err(Error::shape(format!(
                        "training sample has dimension {}, corpus {d}",
                        t.cols()
                    )));
                }
                if t.rows() == 0 {
                    return Err(Error::param("training sample is empty"));
                }
                if !t.is_finite() {
                    return Err(Error::Data("training sample contains non-finite values".into()));
                }
                Some(t)
            }
            (TrainSource::QuerySample, None) => {
                return Err(Error::param("query-sample training needs a training set"))
            }
            (TrainSource::Corpus, Some(_)) => {
                return Err(Error::param(
                    "a training set was given but the training source is the corpus",
                ))
            }
            (TrainSource::Corpus, None) => None,
        };

        let corpus = if cfg.metric.normalizes_inputs() {
            normalized_rows(corpus)
        } else {
            corpus.clone()
        };
        let train_global = match train {
            Some(t) if cfg.metric.normalizes_inputs() => normalized_rows(t),
            Some(t) => t.clone(),
            None => corpus.clone(),
        };

        let quantize = rrr_mode && cfg.rrr.quantize;
        let mixed = quantize && cfg.rrr.mixed_precision;
        let reduced_dim = if rrr_mode { cfg.rrr.reduced_dim } else { None };

        let (projection, identity_projection) = match reduced_dim {
            Some(s) => {
                let w = top_eigenvectors(&train_global, s, seed_for(cfg.seed, 1))?;
                let w = if quantize {
                    matmul(&w, &preconditioner(s, mixed, seed_for(cfg.seed, 2)))?
                } else {
                    w
                };
                (w, false)
            }
            None if quantize => (preconditioner(d, false, seed_for(cfg.seed, 2)), false),
            None => (DenseMatrix::identity(d), true),
        };
        let project = |x: &DenseMatrix| -> Result<DenseMatrix> {
            if identity_projection {
                Ok(x.clone())
            } else {
                matmul(x, &projection)
            }
        };
        let corpus_projected = project(&corpus)?;
        let input_dim = projection.cols();

        let cmetric = ClusterMetric::from(cfg.metric);
        let clustering = match cfg.balance {
            Some(delta) => balanced_kmeans(
                &corpus_projected,
                cfg.clusters,
                cmetric,
                delta,
                cfg.kmeans_iters,
                seed_for(cfg.seed, 3),
            )?,
            None => kmeans(
                &corpus_projected,
                cfg.clusters,
                cmetric,
                cfg.kmeans_iters,
                seed_for(cfg.seed, 3),
            )?,
        };
        let members = clustering.members();
        if members.iter().any(Vec::is_empty) {
            return Err(Error::Build("clustering produced an empty cluster".into()));
        }

        let slots: Vec<ClusterSlot> = if rrr_mode {
            let (train_points, train_projected) = match train {
                Some(_) => {
                    let p = project(&train_global)?;
                    (train_global, p)
                }
                None => (corpus.clone(), corpus_projected.clone()),
            };
            let local_sets = match cfg.rrr.local_train {
                LocalTrain::Routed => routed_training_sets(
                    &train_projected,
                    &clustering.centroids,
                    cfg.rrr.train_w.min(cfg.clusters),
                    cfg.metric,
                )?,
                LocalTrain::ClusterOnly => members.clone(),
            };
            let rotation_v = if quantize {
                preconditioner(cfg.rrr.rank, mixed, seed_for(cfg.seed, 4))
            } else {
                DenseMatrix::identity(cfg.rrr.rank)
            };

            members
                .par_iter()
                .enumerate()
                .map(|(l, ids)| {
                    let c = corpus.select_rows(ids);
                    let cp = corpus_projected.select_rows(ids);
                    let cluster_only = cfg.rrr.local_train == LocalTrain::ClusterOnly;
                    // a cluster no training point routes to learns from its own members
                    let (x, xp) = if cluster_only || local_sets[l].is_empty() {
                        (c.clone(), cp.clone())
                    } else {
                        (
                            train_points.select_rows(&local_sets[l]),
                            train_projected.select_rows(&local_sets[l]),
                        )
                    };
                    let mut rcfg = cfg.rrr.clone();
                    rcfg.quantize = quantize;
                    rcfg.mixed_precision = mixed;
                    rcfg.seed = seed_for(cfg.rrr.seed, 1000 + l as u64);
                    train_cluster(
                        ClusterBlock {
                            ids,
                            points: &c,
                            projected: &cp,
                        },
                        TrainingBlock {
                            points: &x,
                            projected: &xp,
                        },
                        &rcfg,
                        &rotation_v,
                        cfg.metric,
                    )
                    .map(ClusterSlot::Model)
                })
                .collect::<Result<_>>()?
        } else {
            members
                .into_iter()
                .map(|ids| {
                    let norms = (cfg.metric == Metric::Euclidean)
                        .then(|| ids.iter().map(|&i| squared_norm(corpus.row(i))).collect());
                    ClusterSlot::Exact { ids, norms }
                })
                .collect()
        };

        let keep_corpus = cfg.rerank || !rrr_mode;
        Ok(Self {
            layout: IndexLayout {
                metric: cfg.metric,
                dim: d,
                input_dim,
                rank: if rrr_mode { cfg.rrr.rank } else { 0 },
                num_points: m,
                quantized: quantize,
                mixed_precision: mixed,
                balanced: cfg.balance.is_some(),
                scoring_mode: cfg.scoring_mode,
                identity_projection,
            },
            config: Some(cfg.clone()),
            projection,
            centroids: clustering.centroids,
            clusters: slots,
            corpus: keep_corpus.then_some(corpus),
        })
    }

    pub fn layout(&self) -> &IndexLayout {
        &self.layout
    }

    pub fn config(&self) -> Option<&IndexConfig> {
        self.config.as_ref()
    }

    pub fn metric(&self) -> Metric {
        self.layout.metric
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn len(&self) -> usize {
        self.layout.num_points
    }

    pub fn is_empty(&self) -> bool {
        self.layout.num_points == 0
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn centroids(&self) -> &DenseMatrix {
        &self.centroids
    }

    pub fn projection(&self) -> &DenseMatrix {
        &self.projection
    }

    pub fn has_corpus(&self) -> bool {
        self.corpus.is_some()
    }

    /// Stored corpus (unit-normalized for cosine), if retained.
    pub fn corpus(&self) -> Option<&DenseMatrix> {
        self.corpus.as_ref()
    }

    /// Member ids of each cluster.
    pub fn cluster_ids(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.clusters.iter().map(ClusterSlot::ids)
    }

    /// Trained model of cluster `l` (`None` in exact IVF mode).
    pub fn cluster_model(&self, l: usize) -> Option<&ClusterModel> {
        match self.clusters.get(l)? {
            ClusterSlot::Model(m) => Some(m),
            ClusterSlot::Exact { .. } => None,
        }
    }

    /// `x̃ = Pᵀx` for an already normalized query.
    pub fn project(&self, x: &[f32]) -> Vec<f32> {
        if self.layout.identity_projection {
            return x.to_vec();
        }
        let mut out = vec![0.0; self.layout.input_dim];
        vecmat_into(x, &self.projection, &mut out);
        out
    }

    /// Ids of the probed clusters, best first.
    pub fn route(&self, x: &[f32], w: usize) -> Result<Vec<usize>> {
        self.check_query(x)?;
        let xq = self.prepare(x);
        crate::cluster::route(&self.project(&xq), &self.centroids, w, self.layout.metric.into())
    }

    /// Number of points in the `w` clusters a query probes.
    pub fn candidate_count(&self, x: &[f32], w: usize) -> Result<usize> {
        Ok(self
            .route(x, w)?
            .into_iter()
            .map(|l| self.clusters[l].ids().len())
            .sum())
    }

    fn check_query(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.layout.dim {
            return Err(Error::shape(format!(
                "query of dimension {} for an index of dimension {}",
                x.len(),
                self.layout.dim
            )));
        }
        Ok(())
    }

    fn check_params(&self, p: &QueryParams) -> Result<()> {
        if p.k == 0 || p.t == 0 {
            return Err(Error::param("k and t must be positive"));
        }
        if p.w == 0 || p.w > self.clusters.len() {
            return Err(Error::param(format!(
                "cannot probe {} of {} clusters",
                p.w,
                self.clusters.len()
            )));
        }
        if p.rerank {
            if p.k > p.t {
                return Err(Error::param(format!(
                    "k = {} exceeds the re-ranked candidate count t = {}",
                    p.k, p.t
                )));
            }
            if self.corpus.is_none() {
                return Err(Error::param("index was built without re-ranking data"));
            }
        }
        Ok(())
    }

    fn prepare(&self, x: &[f32]) -> Vec<f32> {
        let mut xq = x.to_vec();
        if self.layout.metric.normalizes_inputs() {
            normalize(&mut xq);
        }
        xq
    }

    pub fn query(&self, x: &[f32], p: &QueryParams) -> Result<QueryResult> {
        self.check_query(x)?;
        self.check_params(p)?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Data("query contains non-finite values".into()));
        }
        let metric = self.layout.metric;
        let xq = self.prepare(x);
        let xp = self.project(&xq);
        let probed = route_unchecked(&xp, &self.centroids, p.w, metric.into());

        // (score, id), larger score is better
        let mut candidates: Vec<(f32, usize)> = Vec::new();
        for &l in &probed {
            match &self.clusters[l] {
                ClusterSlot::Model(model) => {
                    let scores = score_cluster(&xp, model, metric)?;
                    let flip = metric == Metric::Euclidean;
                    candidates.extend(
                        scores
                            .into_iter()
                            .zip(&model.point_ids)
                            .map(|(s, &id)| (if flip { -s } else { s }, id)),
                    );
                }
                ClusterSlot::Exact { ids, norms } => {
                    let corpus = self.corpus.as_ref().expect("exact IVF keeps the corpus");
                    for (j, &id) in ids.iter().enumerate() {
                        let ip = dot(&xq, corpus.row(id));
                        let s = match norms {
                            Some(n) => 2.0 * ip - n[j],
                            None => ip,
                        };
                        candidates.push((s, id));
                    }
                }
            }
        }

        let best_first = |a: &(f32, usize), b: &(f32, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if candidates.len() > p.t {
            candidates.select_nth_unstable_by(p.t - 1, best_first);
            candidates.truncate(p.t);
        }

        let mut hits: Vec<(f32, usize)> = if p.rerank {
            let corpus = self.corpus.as_ref().expect("checked in check_params");
            candidates
                .iter()
                .map(|&(_, id)| (metric.dissimilarity(&xq, corpus.row(id)), id))
                .collect()
        } else {
            let offset = match metric {
                Metric::Euclidean => squared_norm(&xq),
                Metric::InnerProduct => 0.0,
                Metric::Cosine => 1.0,
            };
            candidates.iter().map(|&(s, id)| (offset - s, id)).collect()
        };
        hits.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let underfilled = hits.len() < p.k;
        hits.truncate(p.k);

        Ok(QueryResult {
            ids: hits.iter().map(|h| h.1).collect(),
            scores: hits.iter().map(|h| h.0).collect(),
            underfilled,
        })
    }

    /// Answers every row of `queries`; identical to calling [`Self::query`]
    /// on each row, in order.
    pub fn query_batch(&self, queries: &DenseMatrix, p: &QueryParams) -> Result<Vec<QueryResult>> {
        if queries.cols() != self.layout.dim && queries.rows() > 0 {
            return Err(Error::shape(format!(
                "queries of dimension {} for an index of dimension {}",
                queries.cols(),
                self.layout.dim
            )));
        }
        (0..queries.rows())
            .into_par_iter()
            .map(|i| self.query(queries.row(i), p))
            .collect()
    }

    pub fn serialize(&self) -> Vec<u8> {
        format::write_index(self).0
    }

    /// Serialized bytes with a per-section size breakdown.
    pub fn serialize_with_footprint(&self) -> (Vec<u8>, Footprint) {
        format::write_index(self)
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        format::read_index(bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.serialize())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::deserialize(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(metric: Metric) -> IndexConfig {
        IndexConfig {
            metric,
            clusters: 8,
            rrr: RrrConfig {
                rank: 8,
                reduced_dim: Some(12),
                ..RrrConfig::default()
            },
            scoring_mode: ScoringMode::Rrr,
            balance: None,
            rerank: true,
            kmeans_iters: 10,
            seed: 3,
        }
    }

    #[test]
    fn default_cluster_counts() {
        assert_eq!(IndexConfig::default_clusters(10_000), 100);
        assert_eq!(IndexConfig::default_clusters(39_935), 200);
        assert_eq!(IndexConfig::default_clusters(39_936), 1024);
        assert_eq!(IndexConfig::default_clusters(4096 * 39), 4096);
        assert_eq!(IndexConfig::default_clusters(1), 1);
    }

    #[test]
    fn preconditioner_fixes_first_axis() {
        let r = preconditioner(5, true, 1);
        assert_eq!(r.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.column(0), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let g = matmul(&r.transpose(), &r).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g.get(i, j) - want).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn every_point_in_exactly_one_cluster() {
        let corpus = DenseMatrix::gaussian(400, 16, 1);
        let index = RrrIndex::build(&corpus, None, &small_cfg(Metric::Euclidean)).unwrap();
        let mut seen = vec![0; 400];
        for ids in index.cluster_ids() {
            for &i in ids {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn cosine_corpus_is_normalized() {
        let corpus = DenseMatrix::gaussian(300, 16, 2);
        let index = RrrIndex::build(&corpus, None, &small_cfg(Metric::Cosine)).unwrap();
        for row in index.corpus().unwrap().row_iter() {
            assert!((squared_norm(row).sqrt() - 1.0).abs() <= 1e-5);
        }
    }

    #[test]
    fn build_errors() {
        let corpus = DenseMatrix::gaussian(5, 16, 2);
        assert!(matches!(
            RrrIndex::build(&corpus, None, &small_cfg(Metric::Euclidean)),
            Err(Error::Param(_))
        ));
        let mut bad = DenseMatrix::gaussian(100, 16, 2);
        bad.set(3, 3, f32::NAN);
        assert!(matches!(
            RrrIndex::build(&bad, None, &small_cfg(Metric::Euclidean)),
            Err(Error::Data(_))
        ));
        let good = DenseMatrix::gaussian(100, 16, 2);
        let mut cfg = small_cfg(Metric::Euclidean);
        cfg.rrr.train_source = TrainSource::QuerySample;
        assert!(matches!(RrrIndex::build(&good, None, &cfg), Err(Error::Param(_))));
    }

    #[test]
    fn query_errors() {
        let corpus = DenseMatrix::gaussian(200, 16, 3);
        let mut cfg = small_cfg(Metric::InnerProduct);
        cfg.rerank = false;
        let index = RrrIndex::build(&corpus, None, &cfg).unwrap();
        let q = vec![0.5; 16];
        assert!(matches!(index.query(&q[..15], &QueryParams::new(5, 2, 20)), Err(Error::Shape(_))));
        assert!(matches!(index.query(&q, &QueryParams::new(5, 9, 20)), Err(Error::Param(_))));
        // no corpus retained, so re-ranking is unavailable
        assert!(matches!(index.query(&q, &QueryParams::new(5, 2, 20)), Err(Error::Param(_))));
        let r = index.query(&q, &QueryParams::new(5, 2, 20).without_rerank()).unwrap();
        assert_eq!(r.ids.len(), 5);
        assert!(r.scores.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn underfilled_results_are_flagged() {
        let corpus = DenseMatrix::gaussian(64, 8, 4);
        let mut cfg = small_cfg(Metric::Euclidean);
        cfg.clusters = 16;
        cfg.rrr.reduced_dim = None;
        cfg.rrr.rank = 4;
        let index = RrrIndex::build(&corpus, None, &cfg).unwrap();
        let q = corpus.row(0);
        let r = index.query(q, &QueryParams::new(60, 1, 60)).unwrap();
        assert!(r.underfilled);
        assert_eq!(r.ids.len(), index.candidate_count(q, 1).unwrap());
    }
}
