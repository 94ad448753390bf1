use std::collections::HashSet;

use proptest::prelude::*;

use rrr_ann::bench::{synth_dataset, SynthKind};
use rrr_ann::cluster::{balance_bounds, balanced_kmeans, kmeans, route, ClusterMetric};
use rrr_ann::linalg::{jacobi_svd, matmul, random_rotation, randomized_svd, DenseMatrix};
use rrr_ann::quantize::{quantize_matrix_columns, quantize_vector, quantized_vecmat};
use rrr_ann::rrr::{train_cluster, ClusterBlock, ClusterModel, TrainingBlock};
use rrr_ann::{IndexConfig, Metric, QueryParams, RrrConfig, RrrIndex, ScoringMode};

fn det(m: &[f64], n: usize) -> f64 {
    if n == 1 {
        return m[0];
    }
    (0..n)
        .map(|j| {
            let minor: Vec<f64> = (1..n)
                .flat_map(|i| (0..n).filter(move |&c| c != j).map(move |c| (i, c)))
                .map(|(i, c)| m[i * n + c])
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[j] * det(&minor, n - 1)
        })
        .sum()
}

fn model(x: &DenseMatrix, c: &DenseMatrix, rank: usize, seed: u64) -> ClusterModel {
    let ids: Vec<usize> = (0..c.rows()).collect();
    let cfg = RrrConfig {
        rank,
        reduced_dim: None,
        quantize: false,
        seed,
        ..RrrConfig::default()
    };
    train_cluster(
        ClusterBlock {
            ids: &ids,
            points: c,
            projected: c,
        },
        TrainingBlock {
            points: x,
            projected: x,
        },
        &cfg,
        &DenseMatrix::identity(rank.min(c.rows())),
        Metric::InnerProduct,
    )
    .unwrap()
}

fn loss(x: &DenseMatrix, c: &DenseMatrix, beta: &DenseMatrix) -> f64 {
    let y = matmul(x, &c.transpose()).unwrap();
    let p = matmul(x, beta).unwrap();
    y.as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
        .sum::<f64>()
        .sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vecmat_is_associative(n in 1usize..64, k in 1usize..64, m in 1usize..64, seed in any::<u64>()) {
        let x = DenseMatrix::gaussian(1, n, seed);
        let a = DenseMatrix::gaussian(n, k, seed ^ 1);
        let b = DenseMatrix::gaussian(k, m, seed ^ 2);
        let left = matmul(&matmul(&x, &a).unwrap(), &b).unwrap();
        let right = matmul(&x, &matmul(&a, &b).unwrap()).unwrap();
        let scale = right.frobenius_norm().max(1e-6);
        prop_assert!(left.sub(&right).unwrap().frobenius_norm() <= 1e-4 * scale * (n * k) as f32);
    }

    #[test]
    fn full_rank_randomized_svd_reconstructs(rows in 1usize..40, cols in 1usize..40, seed in any::<u64>()) {
        let m = DenseMatrix::gaussian(rows, cols, seed);
        let f = randomized_svd(&m, rows.min(cols), 10, 2, seed).unwrap();
        let err = f.reconstruct().sub(&m).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-3 * m.frobenius_norm());
    }

    #[test]
    fn rotations_have_unit_determinant(dim in 1usize..=8, seed in any::<u64>()) {
        let r = random_rotation(dim, seed);
        let m: Vec<f64> = r.as_slice().iter().map(|&v| f64::from(v)).collect();
        prop_assert!((det(&m, dim).abs() - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn vector_quantization_half_step(x in proptest::collection::vec(-1e3f32..1e3, 1..80)) {
        let q = quantize_vector(&x, false);
        let absmax = x.iter().fold(0.0f32, |a, v| a.max(v.abs()));
        for (v, back) in x.iter().zip(q.dequantize()) {
            prop_assert!((v - back).abs() <= absmax / 254.0 * (1.0 + 1e-5) + f32::EPSILON);
        }
    }

    #[test]
    fn head_only_vectors_score_exactly(h in -50f32..50.0, rows in 2usize..30, cols in 1usize..20, seed in any::<u64>()) {
        let a = DenseMatrix::gaussian(rows, cols, seed);
        let q = quantize_matrix_columns(&a, true);
        let mut x = vec![0.0; rows];
        x[0] = h;
        let got = quantized_vecmat(&x, &q).unwrap();
        for (j, g) in got.iter().enumerate() {
            prop_assert_eq!(*g, h * a.get(0, j));
        }
    }

    #[test]
    fn kmeans_invariants(m in 20usize..300, l in 1usize..12, d in 1usize..8, seed in any::<u64>(), spherical in any::<bool>()) {
        let l = l.min(m);
        let pts = DenseMatrix::gaussian(m, d, seed);
        let metric = if spherical { ClusterMetric::Spherical } else { ClusterMetric::Euclidean };
        let c = kmeans(&pts, l, metric, 15, seed).unwrap();
        prop_assert!(c.distortion_history.windows(2).all(|w| w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0)));
        prop_assert_eq!(c.sizes.iter().sum::<usize>(), m);
        prop_assert!(c.sizes.iter().all(|&s| s > 0));
        if spherical {
            for row in c.centroids.row_iter() {
                let n: f32 = row.iter().map(|v| v * v).sum::<f32>().sqrt();
                prop_assert!((n - 1.0).abs() <= 1e-5);
            }
        }
        let again = kmeans(&pts, l, metric, 15, seed).unwrap();
        prop_assert_eq!(again.assignments, c.assignments);
    }

    #[test]
    fn balanced_sizes_within_bounds(m in 30usize..400, l in 2usize..10, delta in 1usize..20, seed in any::<u64>()) {
        let pts = DenseMatrix::gaussian(m, 4, seed);
        let c = balanced_kmeans(&pts, l, ClusterMetric::Euclidean, delta, 8, seed).unwrap();
        let (lo, hi) = balance_bounds(m, l, delta);
        prop_assert!(c.sizes.iter().all(|&s| s >= lo && s <= hi), "{:?} not in [{lo}, {hi}]", c.sizes);
        prop_assert!(c.sizes.iter().max().unwrap() - c.sizes.iter().min().unwrap() <= delta);
    }

    #[test]
    fn route_prefix(l in 2usize..20, d in 1usize..8, seed in any::<u64>()) {
        let centroids = DenseMatrix::gaussian(l, d, seed);
        let q = DenseMatrix::gaussian(1, d, seed ^ 7);
        for metric in [ClusterMetric::Euclidean, ClusterMetric::Spherical] {
            let full = route(q.row(0), &centroids, l, metric).unwrap();
            for w in 1..l {
                prop_assert_eq!(&route(q.row(0), &centroids, w, metric).unwrap()[..], &full[..w]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rrr_rank_bound_and_loss_order(d in 3usize..20, m_l in 4usize..40, n in 4usize..60, seed in any::<u64>()) {
        let c = DenseMatrix::gaussian(m_l, d, seed);
        let x = DenseMatrix::gaussian(n, d, seed ^ 3);
        let max_rank = d.min(m_l).min(n);
        let mut prev = f64::INFINITY;
        for r in 1..=max_rank {
            let mdl = model(&x, &c, r, seed);
            let beta = mdl.coefficients();
            // numerical rank of A·B is at most r
            let s = jacobi_svd(&beta).singular_values;
            for &v in s.iter().skip(r) {
                prop_assert!(v <= 1e-4 * s[0].max(1e-12));
            }
            let l = loss(&x, &c, &beta);
            prop_assert!(l <= prev * (1.0 + 1e-3) + 1e-3, "rank {r}: {l} > {prev}");
            prev = l;

            // a random rank-r factorization does no better
            let rand_beta = matmul(&DenseMatrix::gaussian(d, r, seed ^ 5), &DenseMatrix::gaussian(r, m_l, seed ^ 6)).unwrap();
            prop_assert!(l <= loss(&x, &c, &rand_beta) * (1.0 + 1e-6));
        }
    }
}

#[test]
fn exact_ivf_without_rerank_returns_true_top_k_of_probed_clusters() {
    let d = synth_dataset(1200, 30, 16, SynthKind::Clustered(6), 2);
    let mut cfg = IndexConfig::with_defaults(Metric::Euclidean, 1200, 16).with_seed(2);
    cfg.clusters = 12;
    cfg.scoring_mode = ScoringMode::ExactIvf;
    let index = RrrIndex::build(&d.corpus, None, &cfg).unwrap();
    let members: Vec<Vec<usize>> = index.cluster_ids().map(<[usize]>::to_vec).collect();
    for q in d.queries.row_iter() {
        let probed = index.route(q, 3).unwrap();
        let mut cands: Vec<(f32, usize)> = probed
            .iter()
            .flat_map(|&l| members[l].iter().map(|&i| (Metric::Euclidean.dissimilarity(q, d.corpus.row(i)), i)))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want: HashSet<usize> = cands.iter().take(10).map(|c| c.1).collect();
        let got = index.query(q, &QueryParams::new(10, 3, 10).without_rerank()).unwrap();
        let got: HashSet<usize> = got.ids.into_iter().collect();
        assert_eq!(got, want);
    }
}

#[test]
fn candidates_grow_with_w() {
    let d = synth_dataset(1000, 20, 16, SynthKind::Gaussian, 4);
    let mut cfg = IndexConfig::with_defaults(Metric::Euclidean, 1000, 16).with_seed(4);
    cfg.clusters = 10;
    cfg.rrr.rank = 8;
    let index = RrrIndex::build(&d.corpus, None, &cfg).unwrap();
    for q in d.queries.row_iter() {
        let mut prev: HashSet<usize> = HashSet::new();
        for w in 1..=10 {
            let cur: HashSet<usize> = index
                .route(q, w)
                .unwrap()
                .into_iter()
                .flat_map(|l| index.cluster_ids().nth(l).unwrap().to_vec())
                .collect();
            assert!(prev.is_subset(&cur));
            prev = cur;
        }
    }
}
