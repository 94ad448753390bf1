//! Reduced-rank regression against a truncated SVD of the cluster points.
//!
//! Both give rank-r coefficient matrices. The regression fits the inner
//! products of the training queries, so its training loss is never worse.

use rrr_ann::linalg::{jacobi_svd, matmul, DenseMatrix};
use rrr_ann::rrr::{train_cluster, ClusterBlock, TrainingBlock};
use rrr_ann::{Metric, RrrConfig};

fn loss(x: &DenseMatrix, c: &DenseMatrix, beta: &DenseMatrix) -> f32 {
    let y = matmul(x, &c.transpose()).unwrap();
    y.sub(&matmul(x, beta).unwrap()).unwrap().frobenius_norm()
}

fn main() -> rrr_ann::Result<()> {
    let (d, m_l, n) = (32, 80, 400);
    let c = DenseMatrix::gaussian(m_l, d, 1);
    // queries concentrated on a few directions
    let mix = DenseMatrix::from_fn(d, d, |i, j| if i == j { 1.0 / (1.0 + i as f32) } else { 0.0 });
    let x = matmul(&DenseMatrix::gaussian(n, d, 2), &mix)?;
    let ids: Vec<usize> = (0..m_l).collect();

    println!(" r   RRR loss   SVD-of-C loss");
    for r in [2, 4, 8, 16, 32] {
        let cfg = RrrConfig {
            rank: r,
            reduced_dim: None,
            quantize: false,
            ..RrrConfig::default()
        };
        let model = train_cluster(
            ClusterBlock { ids: &ids, points: &c, projected: &c },
            TrainingBlock { points: &x, projected: &x },
            &cfg,
            &DenseMatrix::identity(r),
            Metric::InnerProduct,
        )?;
        // rank-r truncation of C: Cᵀ ≈ V_r Σ_r U_rᵀ
        let f = jacobi_svd(&c);
        let ur = DenseMatrix::from_fn(d, r, |i, k| f.v.get(i, k));
        let svd_beta = matmul(&matmul(&ur, &ur.transpose())?, &c.transpose())?;
        println!(
            "{r:2}  {:9.2}  {:9.2}",
            loss(&x, &c, &model.coefficients()),
            loss(&x, &c, &svd_beta)
        );
    }
    Ok(())
}
