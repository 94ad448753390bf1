//! Per-cluster reduced-rank regression scoring models.
//!
//! For a cluster with points `C` (rows) and a local training block `X`, the
//! outputs are the true inner products `Y = X·Cᵀ`. With `V_r` the top-`r`
//! right singular vectors of `Y`, the rank-`r` least-squares model is
//! `β = β_ols · V_r · V_rᵀ`, stored as the factors `A = β_ols · V_r` and
//! `B = V_rᵀ`, so that a prediction costs `(xᵀA)·B`.
//!
//! Without dimensionality reduction `β_ols = Cᵀ` (in the rotated query
//! coordinates). With reduction the inputs are the projected queries `X̃` and
//! `β_ols = X̃†·Y`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{route_unchecked, ClusterMetric};
use crate::error::{Error, Result};
use crate::linalg::{
    matmul, pinv_solve, randomized_svd, squared_norm, vecmat_into, DenseMatrix, SvdParams,
    DEFAULT_RCOND,
};
use crate::metric::Metric;
use crate::quantize::{quantize_matrix_columns, quantized_vecmat, QuantizedMatrix};

pub const DEFAULT_RANK: usize = 32;
pub const DEFAULT_TRAIN_W: usize = 2;

/// Where the global training set comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainSource {
    Corpus,
    QuerySample,
}

/// How each cluster picks its local training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalTrain {
    /// Training points whose `train_w` nearest centroids include the cluster.
    Routed,
    /// The corpus points of the cluster itself.
    ClusterOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrrConfig {
    pub rank: usize,
    /// Projected dimension `s`; `None` keeps the original dimension.
    pub reduced_dim: Option<usize>,
    pub train_source: TrainSource,
    pub local_train: LocalTrain,
    pub train_w: usize,
    pub quantize: bool,
    /// Keep the first component / first factor row in `f32` when quantizing.
    pub mixed_precision: bool,
    pub svd: SvdParams,
    pub seed: u64,
}

impl Default for RrrConfig {
    fn default() -> Self {
        Self {
            rank: DEFAULT_RANK,
            reduced_dim: None,
            train_source: TrainSource::Corpus,
            local_train: LocalTrain::Routed,
            train_w: DEFAULT_TRAIN_W,
            quantize: true,
            mixed_precision: true,
            svd: SvdParams::default(),
            seed: 0,
        }
    }
}

impl RrrConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let input_dim = match self.reduced_dim {
            Some(s) if s == 0 || s > dim => {
                return Err(Error::param(format!(
                    "reduced dimension {s} outside 1..={dim}"
                )))
            }
            Some(s) => s,
            None => dim,
        };
        if self.rank == 0 || self.rank > input_dim {
            return Err(Error::param(format!(
                "rank {} outside 1..={input_dim}",
                self.rank
            )));
        }
        if self.train_w == 0 {
            return Err(Error::param("train_w must be at least 1"));
        }
        Ok(())
    }

    fn quantized_mixed(&self) -> bool {
        self.quantize && self.mixed_precision
    }
}

/// One factor of a cluster model, kept in `f32` or int8.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Dense(DenseMatrix),
    Quantized(QuantizedMatrix),
}

impl Factor {
    pub fn rows(&self) -> usize {
        match self {
            Factor::Dense(m) => m.rows(),
            Factor::Quantized(q) => q.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Factor::Dense(m) => m.cols(),
            Factor::Quantized(q) => q.cols(),
        }
    }

    /// `f32` view of the factor (dequantized if needed).
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Factor::Dense(m) => m.clone(),
            Factor::Quantized(q) => q.dequantize(),
        }
    }

    fn apply(&self, x: &[f32], out: &mut Vec<f32>) -> Result<()> {
        match self {
            Factor::Dense(m) => {
                if x.len() != m.rows() {
                    return Err(Error::shape(format!(
                        "input of length {} for a factor with {} rows",
                        x.len(),
                        m.rows()
                    )));
                }
                out.resize(m.cols(), 0.0);
                vecmat_into(x, m, out);
            }
            Factor::Quantized(q) => *out = quantized_vecmat(x, q)?,
        }
        Ok(())
    }
}

/// Trained scorer for one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// Corpus indices of the cluster members, in column order of `b`.
    pub point_ids: Vec<usize>,
    /// `input_dim x rank`
    pub a: Factor,
    /// `rank x m_l`
    pub b: Factor,
    /// `‖c_j‖²` per member (Euclidean only).
    pub norm_terms: Option<Vec<f32>>,
    /// Set when the cluster was smaller than the rank and stores `β_ols`
    /// exactly (`b` is the identity).
    pub exact_fallback: bool,
}

impl ClusterModel {
    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    /// `f32` product `A·B`, the effective regression coefficients.
    pub fn coefficients(&self) -> DenseMatrix {
        matmul(&self.a.to_dense(), &self.b.to_dense()).expect("factor shapes agree")
    }

    /// Inner-product estimates `(x̃ᵀA)·B` for every member.
    pub fn predict(&self, query_projected: &[f32]) -> Result<Vec<f32>> {
        let mut mid = Vec::new();
        let mut out = Vec::new();
        self.a.apply(query_projected, &mut mid)?;
        self.b.apply(&mid, &mut out)?;
        Ok(out)
    }
}

/// Cluster members in both coordinate systems.
#[derive(Debug, Clone, Copy)]
pub struct ClusterBlock<'a> {
    pub ids: &'a [usize],
    /// Original-space points `C`, `m_l x d`.
    pub points: &'a DenseMatrix,
    /// Points in query-input coordinates `C̃ = C·P`, `m_l x input_dim`.
    pub projected: &'a DenseMatrix,
}

/// Local training rows in both coordinate systems.
#[derive(Debug, Clone, Copy)]
pub struct TrainingBlock<'a> {
    /// Original-space training points `X`, `n_l x d`.
    pub points: &'a DenseMatrix,
    /// Projected inputs `X̃ = X·P`, `n_l x input_dim`.
    pub projected: &'a DenseMatrix,
}

/// Fits the reduced-rank model of one cluster. `rotation_v` is an orthogonal
/// `rank x rank` matrix applied to `V_r` before the factors are formed; it
/// leaves `A·B` unchanged and spreads the intermediate product across
/// components ahead of re-quantization.
pub fn train_cluster(
    cluster: ClusterBlock<'_>,
    train: TrainingBlock<'_>,
    cfg: &RrrConfig,
    rotation_v: &DenseMatrix,
    metric: Metric,
) -> Result<ClusterModel> {
    let m_l = cluster.points.rows();
    if m_l == 0 || cluster.ids.len() != m_l || cluster.projected.rows() != m_l {
        return Err(Error::Build("cannot train a model for an empty cluster".into()));
    }
    if train.points.rows() == 0 || train.points.rows() != train.projected.rows() {
        return Err(Error::Build("cluster has no training rows".into()));
    }
    if train.points.cols() != cluster.points.cols()
        || train.projected.cols() != cluster.projected.cols()
    {
        return Err(Error::shape("training and cluster blocks differ in dimension"));
    }
    let r = cfg.rank;
    let reduced = cfg.reduced_dim.is_some();

    // Y = X·Cᵀ in the original space.
    let y = crate::linalg::matmul_transposed(train.points, cluster.points)?;

    let exact_fallback = m_l < r;
    let (a, b) = if exact_fallback {
        let a = if reduced {
            pinv_solve(train.projected, &y, DEFAULT_RCOND)?
        } else {
            cluster.projected.transpose()
        };
        (a, DenseMatrix::identity(m_l))
    } else {
        if rotation_v.rows() != r || rotation_v.cols() != r {
            return Err(Error::shape(format!(
                "rotation of {}x{} for rank {r}",
                rotation_v.rows(),
                rotation_v.cols()
            )));
        }
        let v = top_right_singular_vectors(&y, r, cfg.svd, cfg.seed)?;
        let v = matmul(&v, rotation_v)?;
        let a = if reduced {
            let yv = matmul(&y, &v)?;
            pinv_solve(train.projected, &yv, DEFAULT_RCOND)?
        } else {
            matmul(&cluster.projected.transpose(), &v)?
        };
        (a, v.transpose())
    };

    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Build("non-finite regression factors".into()));
    }

    let (a, b) = if cfg.quantize {
        let mixed = cfg.quantized_mixed();
        (
            Factor::Quantized(quantize_matrix_columns(&a, mixed)),
            Factor::Quantized(quantize_matrix_columns(&b, mixed)),
        )
    } else {
        (Factor::Dense(a), Factor::Dense(b))
    };

    let norm_terms = (metric == Metric::Euclidean)
        .then(|| cluster.points.row_iter().map(squared_norm).collect());

    Ok(ClusterModel {
        point_ids: cluster.ids.to_vec(),
        a,
        b,
        norm_terms,
        exact_fallback,
    })
}

/// `V_r` of `y`, padding with zero rows when `y` has fewer rows than `r`
/// (zero rows change neither the right singular vectors nor the loss).
fn top_right_singular_vectors(
    y: &DenseMatrix,
    r: usize,
    svd: SvdParams,
    seed: u64,
) -> Result<DenseMatrix> {
    let padded;
    let y = if y.rows() < r {
        let mut data = y.as_slice().to_vec();
        data.resize(r * y.cols(), 0.0);
        padded = DenseMatrix::from_vec(r, y.cols(), data)?;
        &padded
    } else {
        y
    };
    Ok(randomized_svd(y, r, svd.oversample, svd.power_iters, seed)?.v)
}

/// Scores of every member of a cluster. Euclidean returns
/// `-2·ŷ_j + ‖c_j‖²` (lower is better); inner product and cosine return `ŷ_j`
/// (higher is better).
pub fn score_cluster(query_projected: &[f32], model: &ClusterModel, metric: Metric) -> Result<Vec<f32>> {
    let mut y = model.predict(query_projected)?;
    if metric == Metric::Euclidean {
        let norms = model
            .norm_terms
            .as_ref()
            .ok_or_else(|| Error::Data("Euclidean model without norm terms".into()))?;
        for (v, &n) in y.iter_mut().zip(norms) {
            *v = -2.0 * *v + n;
        }
    }
    Ok(y)
}

/// `J_l`: training rows routed to cluster `l` by their `train_w` nearest
/// centroids. `global_train` is in the centroid coordinate system.
pub fn select_training_rows(
    global_train: &DenseMatrix,
    centroids: &DenseMatrix,
    l: usize,
    train_w: usize,
    metric: Metric,
) -> Result<Vec<usize>> {
    if l >= centroids.rows() {
        return Err(Error::param(format!("cluster {l} out of range")));
    }
    Ok(routed_training_sets(global_train, centroids, train_w, metric)?.swap_remove(l))
}

/// `J_l` for every cluster at once, each ascending.
pub fn routed_training_sets(
    global_train: &DenseMatrix,
    centroids: &DenseMatrix,
    train_w: usize,
    metric: Metric,
) -> Result<Vec<Vec<usize>>> {
    let total = centroids.rows();
    if train_w == 0 || train_w > total {
        return Err(Error::param(format!("train_w {train_w} outside 1..={total}")));
    }
    if global_train.cols() != centroids.cols() {
        return Err(Error::shape("training points and centroids differ in dimension"));
    }
    let cm = ClusterMetric::from(metric);
    let routes: Vec<Vec<usize>> = (0..global_train.rows())
        .into_par_iter()
        .map(|i| route_unchecked(global_train.row(i), centroids, train_w, cm))
        .collect();
    let mut sets = vec![Vec::new(); total];
    for (i, r) in routes.iter().enumerate() {
        for &l in r {
            sets[l].push(i);
        }
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matmul_transposed, random_rotation};

    fn block<'a>(ids: &'a [usize], c: &'a DenseMatrix) -> ClusterBlock<'a> {
        ClusterBlock {
            ids,
            points: c,
            projected: c,
        }
    }

    fn dense_cfg(rank: usize) -> RrrConfig {
        RrrConfig {
            rank,
            quantize: false,
            ..RrrConfig::default()
        }
    }

    #[test]
    fn full_rank_model_reproduces_inner_products() {
        let c = DenseMatrix::gaussian(20, 8, 1);
        let x = DenseMatrix::gaussian(60, 8, 2);
        let ids: Vec<usize> = (0..20).collect();
        let cfg = dense_cfg(8);
        let model = train_cluster(
            block(&ids, &c),
            TrainingBlock { points: &x, projected: &x },
            &cfg,
            &random_rotation(8, 3),
            Metric::InnerProduct,
        )
        .unwrap();
        let q = DenseMatrix::gaussian(1, 8, 4).into_vec();
        let got = score_cluster(&q, &model, Metric::InnerProduct).unwrap();
        let want: Vec<f32> = (0..20).map(|j| crate::linalg::dot(&q, c.row(j))).collect();
        for (g, &w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-3 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn zero_query_scores_norm_terms() {
        let c = DenseMatrix::gaussian(40, 16, 5);
        let ids: Vec<usize> = (100..140).collect();
        let cfg = RrrConfig {
            rank: 4,
            ..RrrConfig::default()
        };
        let model = train_cluster(
            block(&ids, &c),
            TrainingBlock { points: &c, projected: &c },
            &cfg,
            &random_rotation(4, 1),
            Metric::Euclidean,
        )
        .unwrap();
        let s = score_cluster(&[0.0; 16], &model, Metric::Euclidean).unwrap();
        assert_eq!(&s, model.norm_terms.as_ref().unwrap());
        assert_eq!(model.point_ids, ids);
    }

    #[test]
    fn small_cluster_falls_back_to_exact() {
        let c = DenseMatrix::gaussian(3, 10, 7);
        let x = DenseMatrix::gaussian(2, 10, 8);
        let ids = [4, 9, 11];
        let model = train_cluster(
            block(&ids, &c),
            TrainingBlock { points: &x, projected: &x },
            &dense_cfg(5),
            &DenseMatrix::identity(5),
            Metric::InnerProduct,
        )
        .unwrap();
        assert!(model.exact_fallback);
        assert_eq!(model.rank(), 3);
        let q = DenseMatrix::gaussian(1, 10, 9).into_vec();
        let got = model.predict(&q).unwrap();
        for (j, g) in got.iter().enumerate() {
            assert!((g - crate::linalg::dot(&q, c.row(j))).abs() <= 1e-4);
        }
    }

    #[test]
    fn few_training_rows_still_train() {
        // n_l < r < m_l: Y is padded, factors keep rank r
        let c = DenseMatrix::gaussian(30, 12, 1);
        let x = DenseMatrix::gaussian(3, 12, 2);
        let ids: Vec<usize> = (0..30).collect();
        let model = train_cluster(
            block(&ids, &c),
            TrainingBlock { points: &x, projected: &x },
            &dense_cfg(6),
            &DenseMatrix::identity(6),
            Metric::InnerProduct,
        )
        .unwrap();
        assert!(!model.exact_fallback);
        assert_eq!((model.a.cols(), model.b.rows()), (6, 6));
        // the training rows themselves are predicted exactly (rank(Y) <= 3)
        for i in 0..3 {
            let got = model.predict(x.row(i)).unwrap();
            for (j, g) in got.iter().enumerate() {
                let w = crate::linalg::dot(x.row(i), c.row(j));
                assert!((g - w).abs() <= 1e-3 * w.abs().max(1.0));
            }
        }
    }

    #[test]
    fn empty_cluster_is_an_error() {
        let c = DenseMatrix::zeros(0, 4);
        let x = DenseMatrix::gaussian(5, 4, 1);
        let r = train_cluster(
            block(&[], &c),
            TrainingBlock { points: &x, projected: &x },
            &dense_cfg(2),
            &DenseMatrix::identity(2),
            Metric::InnerProduct,
        );
        assert!(matches!(r, Err(Error::Build(_))));
    }

    #[test]
    fn rotation_does_not_change_coefficients() {
        let c = DenseMatrix::gaussian(30, 10, 3);
        let x = DenseMatrix::gaussian(80, 10, 4);
        let ids: Vec<usize> = (0..30).collect();
        let train = TrainingBlock { points: &x, projected: &x };
        let plain = train_cluster(block(&ids, &c), train, &dense_cfg(5), &DenseMatrix::identity(5), Metric::InnerProduct).unwrap();
        let rotated = train_cluster(block(&ids, &c), train, &dense_cfg(5), &random_rotation(5, 9), Metric::InnerProduct).unwrap();
        let diff = plain.coefficients().sub(&rotated.coefficients()).unwrap().frobenius_norm();
        assert!(diff <= 1e-4 * plain.coefficients().frobenius_norm());
    }

    #[test]
    fn reduced_model_matches_explicit_formula() {
        // A = (X W)† Y V_r, checked against an explicit pseudoinverse
        let d = 12;
        let c = DenseMatrix::gaussian(25, d, 1);
        let x = DenseMatrix::gaussian(70, d, 2);
        let w = crate::linalg::top_eigenvectors(&x, 6, 0).unwrap();
        let xp = matmul(&x, &w).unwrap();
        let cp = matmul(&c, &w).unwrap();
        let ids: Vec<usize> = (0..25).collect();
        let cfg = RrrConfig {
            rank: 4,
            reduced_dim: Some(6),
            quantize: false,
            ..RrrConfig::default()
        };
        let model = train_cluster(
            ClusterBlock { ids: &ids, points: &c, projected: &cp },
            TrainingBlock { points: &x, projected: &xp },
            &cfg,
            &DenseMatrix::identity(4),
            Metric::InnerProduct,
        )
        .unwrap();
        let y = matmul_transposed(&x, &c).unwrap();
        let v = model.b.to_dense().transpose();
        let want = matmul(
            &crate::linalg::pseudoinverse(&xp, DEFAULT_RCOND),
            &matmul(&y, &v).unwrap(),
        )
        .unwrap();
        let diff = model.a.to_dense().sub(&want).unwrap().frobenius_norm();
        assert!(diff <= 1e-3 * want.frobenius_norm(), "{diff}");
    }

    #[test]
    fn routed_sets_cover_and_partition() {
        let cents = DenseMatrix::gaussian(5, 3, 1);
        let train = DenseMatrix::gaussian(200, 3, 2);
        let all = routed_training_sets(&train, &cents, 5, Metric::Euclidean).unwrap();
        assert!(all.iter().all(|s| s.len() == 200));

        let one = routed_training_sets(&train, &cents, 1, Metric::Euclidean).unwrap();
        let mut seen = vec![0usize; 200];
        for s in &one {
            for &i in s {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(select_training_rows(&train, &cents, 2, 1, Metric::Euclidean).unwrap(), one[2]);
    }

    #[test]
    fn boundary_points_land_in_both_clusters() {
        let cents = DenseMatrix::from_rows(&[[-1.0, 0.0], [1.0, 0.0]]).unwrap();
        let train = DenseMatrix::from_rows(&[[-0.9, 0.0], [0.05, 0.3], [-0.05, -0.2], [0.95, 0.1]]).unwrap();
        let one = routed_training_sets(&train, &cents, 1, Metric::Euclidean).unwrap();
        assert_eq!(one, vec![vec![0, 2], vec![1, 3]]);
        let two = routed_training_sets(&train, &cents, 2, Metric::Euclidean).unwrap();
        assert!(two[0].contains(&1) && two[1].contains(&1));
        assert!(two[0].contains(&2) && two[1].contains(&2));
    }

    fn spearman(a: &[f32], b: &[f32]) -> f64 {
        fn ranks(v: &[f32]) -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
            let mut r = vec![0.0; v.len()];
            for (rank, &i) in idx.iter().enumerate() {
                r[i] = rank as f64;
            }
            r
        }
        let (ra, rb) = (ranks(a), ranks(b));
        let n = a.len() as f64;
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn quantized_scores_preserve_ranking() {
        let (d, r, m_l) = (64, 32, 100);
        let c = DenseMatrix::gaussian(m_l, d, 11);
        let x = DenseMatrix::gaussian(400, d, 12);
        let ids: Vec<usize> = (0..m_l).collect();
        let rot = random_rotation(r, 5);
        let train = TrainingBlock { points: &x, projected: &x };
        let f32_model = train_cluster(block(&ids, &c), train, &dense_cfg(r), &rot, Metric::InnerProduct).unwrap();
        let q_cfg = RrrConfig { rank: r, ..RrrConfig::default() };
        let q_model = train_cluster(block(&ids, &c), train, &q_cfg, &rot, Metric::InnerProduct).unwrap();
        for s in 0..20 {
            let q = DenseMatrix::gaussian(1, d, 1000 + s).into_vec();
            let exact = score_cluster(&q, &f32_model, Metric::InnerProduct).unwrap();
            let quant = score_cluster(&q, &q_model, Metric::InnerProduct).unwrap();
            let rho = spearman(&exact, &quant);
            assert!(rho >= 0.95, "spearman {rho}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(RrrConfig { rank: 0, ..RrrConfig::default() }.validate(8).is_err());
        assert!(RrrConfig { rank: 9, ..RrrConfig::default() }.validate(8).is_err());
        assert!(RrrConfig { rank: 4, reduced_dim: Some(3), ..RrrConfig::default() }.validate(8).is_err());
        assert!(RrrConfig { rank: 4, reduced_dim: Some(9), ..RrrConfig::default() }.validate(8).is_err());
        assert!(RrrConfig { rank: 4, train_w: 0, ..RrrConfig::default() }.validate(8).is_err());
        assert!(RrrConfig { rank: 4, reduced_dim: Some(6), ..RrrConfig::default() }.validate(8).is_ok());
    }
}
