//! Standard versus balanced k-means on skewed data.

use rrr_ann::bench::synth_blobs;
use rrr_ann::cluster::{balance_bounds, balanced_kmeans, kmeans, ClusterMetric};
use rrr_ann::linalg::DenseMatrix;

fn main() -> rrr_ann::Result<()> {
    // one dense blob and a sparse background
    let (blob, _) = synth_blobs(3000, 8, 1, 1);
    let mut background = DenseMatrix::gaussian(1000, 8, 2);
    background.scale(20.0);
    let mut rows: Vec<Vec<f32>> = blob.row_iter().map(<[f32]>::to_vec).collect();
    rows.extend(background.row_iter().map(<[f32]>::to_vec));
    let points = DenseMatrix::from_rows(&rows)?;

    let l = 16;
    let plain = kmeans(&points, l, ClusterMetric::Euclidean, 25, 0)?;
    let balanced = balanced_kmeans(&points, l, ClusterMetric::Euclidean, 16, 25, 0)?;
    let spread = |s: &[usize]| s.iter().max().unwrap() - s.iter().min().unwrap();
    println!("k-means sizes:  {:?} (max - min = {})", plain.sizes, spread(&plain.sizes));
    println!("balanced sizes: {:?} (max - min = {})", balanced.sizes, spread(&balanced.sizes));
    println!("bounds for Δ = 16: {:?}", balance_bounds(points.rows(), l, 16));
    Ok(())
}
