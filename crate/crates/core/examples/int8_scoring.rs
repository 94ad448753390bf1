//! Scoring a cluster with int8 factors and the integer GEMV kernel.

use rrr_ann::linalg::DenseMatrix;
use rrr_ann::quantize::{int8_gemv, quantize_matrix_columns, quantize_vector, quantized_vecmat};

fn main() -> rrr_ann::Result<()> {
    let a = DenseMatrix::gaussian(64, 32, 3);
    let x: Vec<f32> = DenseMatrix::gaussian(1, 64, 4).into_vec();

    let exact = a.vecmat(&x)?;
    let qa = quantize_matrix_columns(&a, false);
    let approx = quantized_vecmat(&x, &qa)?;
    let err = exact.iter().zip(&approx).map(|(e, q)| (e - q).abs()).fold(0.0, f32::max);
    println!("max |xᵀA - int8 estimate| = {err:.4} (max |xᵀA| = {:.2})", exact.iter().fold(0.0f32, |m, v| m.max(v.abs())));

    // raw kernel output is exact integer arithmetic on the codes
    let qx = quantize_vector(&x, false);
    let raw = int8_gemv(&qx, &qa)?;
    println!("first raw accumulators: {:?}", &raw[..4]);

    // projected queries put most of their energy in the first coordinate;
    // keeping that row in f32 stops it from dominating the int8 scale
    let mut head_heavy = x.clone();
    head_heavy[0] = 40.0;
    let truth = a.vecmat(&head_heavy)?;
    let mse = |v: &[f32]| v.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f32>() / v.len() as f32;
    let plain = quantized_vecmat(&head_heavy, &qa)?;
    let mixed = quantized_vecmat(&head_heavy, &quantize_matrix_columns(&a, true))?;
    println!("head-heavy query MSE: int8 {:.5}, mixed precision {:.5}", mse(&plain), mse(&mixed));
    Ok(())
}
