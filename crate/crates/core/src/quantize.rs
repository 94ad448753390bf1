//! Absmax 8-bit quantization and the integer vector–matrix kernel.
//!
//! Matrices are quantized column by column: column `j` is scaled by
//! `127 / max_i |m_ij|` and rounded half away from zero. With mixed precision
//! the first component of a vector (and the first row of a matrix) is kept in
//! `f32` and contributes to products through a separate floating-point term.
//!
//! Matrix codes are stored offset by +128 as `u8`. The kernel multiplies
//! signed query codes with these unsigned codes and removes the offset with a
//! single correction, `xᵀA = xᵀ(A + 128) - 128·Σx`, which is the layout that
//! signed-by-unsigned dot-product instructions consume.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Largest number of quantized rows accepted by one [`int8_gemv`] call.
/// `127 · 255 · 2¹⁵` still fits in an `i32`.
pub const MAX_GEMV_ROWS: usize = 1 << 15;

const CODE_OFFSET: i32 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedVector {
    pub values: Vec<i8>,
    pub scale: f32,
    /// Unquantized first component when mixed precision is on.
    pub head: Option<f32>,
}

/// `round(scale · v)` clamped to the symmetric int8 range. `f32::round`
/// rounds ties away from zero.
#[inline]
fn quantize_value(v: f32, scale: f32) -> i8 {
    (v * scale).round().clamp(-127.0, 127.0) as i8
}

fn absmax_scale(values: impl Iterator<Item = f32>) -> f32 {
    let absmax = values.fold(0.0f32, |m, v| m.max(v.abs()));
    if absmax > 0.0 {
        127.0 / absmax
    } else {
        1.0
    }
}

pub fn quantize_vector(x: &[f32], mixed_precision: bool) -> QuantizedVector {
    let (head, tail) = match (mixed_precision, x.split_first()) {
        (true, Some((&h, t))) => (Some(h), t),
        (true, None) => (Some(0.0), x),
        (false, _) => (None, x),
    };
    let scale = absmax_scale(tail.iter().copied());
    QuantizedVector {
        values: tail.iter().map(|&v| quantize_value(v, scale)).collect(),
        scale,
        head,
    }
}

impl QuantizedVector {
    /// Approximate reconstruction of the source vector.
    pub fn dequantize(&self) -> Vec<f32> {
        let inv = 1.0 / self.scale;
        self.head
            .into_iter()
            .chain(self.values.iter().map(|&q| f32::from(q) * inv))
            .collect()
    }
}

/// Column-wise absmax quantized matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix {
    rows: usize,
    cols: usize,
    /// Quantized rows (all rows, or rows 1.. with mixed precision), row-major,
    /// each code stored as `q + 128`.
    codes: Vec<u8>,
    col_scales: Vec<f32>,
    head_row: Option<Vec<f32>>,
}

pub fn quantize_matrix_columns(m: &DenseMatrix, mixed_precision: bool) -> QuantizedMatrix {
    let (rows, cols) = (m.rows(), m.cols());
    let first = usize::from(mixed_precision && rows > 0);
    let head_row = mixed_precision.then(|| {
        if rows > 0 {
            m.row(0).to_vec()
        } else {
            vec![0.0; cols]
        }
    });

    let col_scales: Vec<f32> = (0..cols)
        .map(|j| absmax_scale((first..rows).map(|i| m.get(i, j))))
        .collect();

    let mut codes = Vec::with_capacity((rows - first) * cols);
    for i in first..rows {
        for (&v, &s) in m.row(i).iter().zip(&col_scales) {
            codes.push((i32::from(quantize_value(v, s)) + CODE_OFFSET) as u8);
        }
    }
    QuantizedMatrix {
        rows,
        cols,
        codes,
        col_scales,
        head_row,
    }
}

impl QuantizedMatrix {
    /// Reassembles a matrix from its serialized parts. `values` holds the
    /// signed codes of the quantized rows, row-major.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        head_row: Option<Vec<f32>>,
        col_scales: Vec<f32>,
        values: &[i8],
    ) -> Result<Self> {
        let quantized_rows = rows - usize::from(head_row.is_some() && rows > 0);
        if col_scales.len() != cols
            || values.len() != quantized_rows * cols
            || head_row.as_ref().is_some_and(|h| h.len() != cols)
        {
            return Err(Error::shape(format!(
                "quantized parts do not describe a {rows}x{cols} matrix"
            )));
        }
        if col_scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Data("column scales must be positive".into()));
        }
        if values.contains(&i8::MIN) {
            return Err(Error::Data("quantized code -128 out of range".into()));
        }
        Ok(Self {
            rows,
            cols,
            codes: values
                .iter()
                .map(|&q| (i32::from(q) + CODE_OFFSET) as u8)
                .collect(),
            col_scales,
            head_row,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of rows held as int8 codes.
    pub fn quantized_rows(&self) -> usize {
        self.codes.len().checked_div(self.cols).unwrap_or(0)
    }

    pub fn col_scales(&self) -> &[f32] {
        &self.col_scales
    }

    pub fn head_row(&self) -> Option<&[f32]> {
        self.head_row.as_deref()
    }

    pub fn is_mixed_precision(&self) -> bool {
        self.head_row.is_some()
    }

    /// Signed code of quantized row `i`, column `j`.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> i8 {
        (i32::from(self.codes[i * self.cols + j]) - CODE_OFFSET) as i8
    }

    /// Signed codes, row-major.
    pub fn values(&self) -> impl ExactSizeIterator<Item = i8> + '_ {
        self.codes
            .iter()
            .map(|&u| (i32::from(u) - CODE_OFFSET) as i8)
    }

    /// Offset (`q + 128`) codes, row-major.
    pub fn unsigned_codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn dequantize(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        let first = match &self.head_row {
            Some(h) if self.rows > 0 => {
                out.row_mut(0).copy_from_slice(h);
                1
            }
            _ => 0,
        };
        for i in 0..self.quantized_rows() {
            for j in 0..self.cols {
                out.set(i + first, j, f32::from(self.value(i, j)) / self.col_scales[j]);
            }
        }
        out
    }

    /// Bytes taken by the int8 codes alone.
    pub fn code_bytes(&self) -> usize {
        self.codes.len()
    }
}

/// Exact `i32` products of the quantized vector tail with the quantized rows.
pub fn int8_gemv(x: &QuantizedVector, m: &QuantizedMatrix) -> Result<Vec<i32>> {
    let mut out = vec![0i32; m.cols];
    int8_gemv_into(x, m, &mut out)?;
    Ok(out)
}

pub fn int8_gemv_into(x: &QuantizedVector, m: &QuantizedMatrix, out: &mut [i32]) -> Result<()> {
    let rows = m.quantized_rows();
    if x.values.len() != rows || out.len() != m.cols {
        return Err(Error::shape(format!(
            "int8 product of a {}-vector with {} quantized rows x {} columns",
            x.values.len(),
            rows,
            m.cols
        )));
    }
    if x.head.is_some() != m.head_row.is_some() {
        return Err(Error::shape(
            "mixed-precision layout differs between vector and matrix",
        ));
    }
    if rows > MAX_GEMV_ROWS {
        return Err(Error::param(format!(
            "{rows} rows exceed the {MAX_GEMV_ROWS}-row accumulator bound"
        )));
    }
    out.iter_mut().for_each(|v| *v = 0);
    let mut x_sum = 0i32;
    if m.cols > 0 {
        for (&xi, row) in x.values.iter().zip(m.codes.chunks_exact(m.cols)) {
            if xi == 0 {
                continue;
            }
            let xi = i32::from(xi);
            x_sum += xi;
            for (o, &u) in out.iter_mut().zip(row) {
                *o += xi * i32::from(u);
            }
        }
    }
    let correction = CODE_OFFSET * x_sum;
    out.iter_mut().for_each(|v| *v -= correction);
    Ok(())
}

/// `out_j = raw_j / (x_scale · col_scales_j) + head_contrib_j`.
pub fn dequantize_product(
    raw: &[i32],
    x_scale: f32,
    col_scales: &[f32],
    head_contrib: &[f32],
) -> Result<Vec<f32>> {
    if raw.len() != col_scales.len() || raw.len() != head_contrib.len() {
        return Err(Error::shape("dequantization inputs differ in length"));
    }
    Ok(raw
        .iter()
        .zip(col_scales)
        .zip(head_contrib)
        .map(|((&r, &c), &h)| r as f32 / (x_scale * c) + h)
        .collect())
}

/// Approximates `xᵀm` in floating point through quantize → int8 GEMV →
/// dequantize, carrying the mixed-precision head in `f32`.
pub fn quantized_vecmat(x: &[f32], m: &QuantizedMatrix) -> Result<Vec<f32>> {
    if x.len() != m.rows {
        return Err(Error::shape(format!(
            "vector of length {} times {}x{} quantized matrix",
            x.len(),
            m.rows,
            m.cols
        )));
    }
    let qx = quantize_vector(x, m.is_mixed_precision());
    let mut raw = vec![0i32; m.cols];
    int8_gemv_into(&qx, m, &mut raw)?;
    let mut out = vec![0.0f32; m.cols];
    let denom_x = qx.scale;
    for ((o, &r), &c) in out.iter_mut().zip(&raw).zip(&m.col_scales) {
        *o = r as f32 / (denom_x * c);
    }
    if let (Some(h), Some(head_row)) = (qx.head, &m.head_row) {
        for (o, &a) in out.iter_mut().zip(head_row) {
            *o += h * a;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_rotation, DenseMatrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_signed(x: &[i8], m: &QuantizedMatrix) -> Vec<i32> {
        let mut out = vec![0i32; m.cols()];
        for (i, &xi) in x.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += i32::from(xi) * i32::from(m.value(i, j));
            }
        }
        out
    }

    #[test]
    fn zero_vector_convention() {
        let q = quantize_vector(&[0.0, 0.0, 0.0], false);
        assert_eq!(q.values, vec![0, 0, 0]);
        assert_eq!(q.scale, 1.0);
        assert_eq!(q.head, None);
    }

    #[test]
    fn absmax_formula_with_half_away_rounding() {
        let q = quantize_vector(&[1.0, -0.5, 0.25], false);
        assert_eq!(q.scale, 127.0);
        assert_eq!(q.values, vec![127, -64, 32]);
    }

    #[test]
    fn mixed_precision_keeps_head() {
        let q = quantize_vector(&[5.0, 2.0, -1.0], true);
        assert_eq!(q.head, Some(5.0));
        assert_eq!(q.values, vec![127, -64]);
        assert_eq!(q.scale, 63.5);
    }

    #[test]
    fn matrix_column_scales() {
        let z = quantize_matrix_columns(&DenseMatrix::zeros(3, 2), false);
        assert!(z.values().all(|v| v == 0));
        assert_eq!(z.col_scales(), &[1.0, 1.0]);

        let d = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let q = quantize_matrix_columns(&d, false);
        assert_eq!(q.col_scales(), &[127.0, 63.5]);
        assert_eq!(q.values().collect::<Vec<_>>(), vec![127, 0, 0, 127]);
    }

    #[test]
    fn mixed_matrix_skips_first_row_in_scales() {
        let m = DenseMatrix::from_rows(&[[100.0, -50.0], [1.0, 0.5], [-0.5, 0.25]]).unwrap();
        let q = quantize_matrix_columns(&m, true);
        assert_eq!(q.head_row(), Some(&[100.0, -50.0][..]));
        assert_eq!(q.quantized_rows(), 2);
        assert_eq!(q.col_scales(), &[127.0, 254.0]);
        assert_eq!(q.dequantize().row(0), &[100.0, -50.0]);
    }

    #[test]
    fn gemv_small_cases() {
        let m = quantize_matrix_columns(&DenseMatrix::gaussian(4, 3, 1), false);
        let zero = QuantizedVector {
            values: vec![0; 4],
            scale: 1.0,
            head: None,
        };
        assert_eq!(int8_gemv(&zero, &m).unwrap(), vec![0, 0, 0]);

        let one_row = QuantizedMatrix::from_parts(1, 3, None, vec![1.0; 3], &[3, -7, 127]).unwrap();
        let x = QuantizedVector {
            values: vec![-5],
            scale: 1.0,
            head: None,
        };
        assert_eq!(int8_gemv(&x, &one_row).unwrap(), vec![-15, 35, -635]);
    }

    #[test]
    fn gemv_rejects_length_mismatch() {
        let m = quantize_matrix_columns(&DenseMatrix::gaussian(4, 3, 1), false);
        let x = quantize_vector(&[1.0, 2.0], false);
        assert!(matches!(int8_gemv(&x, &m), Err(Error::Shape(_))));
    }

    #[test]
    fn gemv_extreme_codes_do_not_overflow() {
        let rows = MAX_GEMV_ROWS;
        let values = vec![-127i8; rows];
        let m = QuantizedMatrix::from_parts(rows, 1, None, vec![1.0], &values).unwrap();
        let x = QuantizedVector {
            values: vec![-127; rows],
            scale: 1.0,
            head: None,
        };
        assert_eq!(int8_gemv(&x, &m).unwrap(), vec![127 * 127 * rows as i32]);
    }

    #[test]
    fn dequantize_product_cases() {
        assert_eq!(
            dequantize_product(&[0, 0], 3.0, &[2.0, 5.0], &[0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            dequantize_product(&[7, -3], 1.0, &[1.0, 1.0], &[0.0, 0.0]).unwrap(),
            vec![7.0, -3.0]
        );
        assert_eq!(
            dequantize_product(&[254], 2.0, &[127.0], &[1.5]).unwrap(),
            vec![2.5]
        );
    }

    #[test]
    fn pipeline_error_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..50 {
            let d = rng.random_range(1..=64);
            let r = rng.random_range(1..=64);
            let a = DenseMatrix::gaussian(d, r, 100 + trial);
            let x: Vec<f32> = DenseMatrix::gaussian(1, d, 200 + trial).into_vec();
            let exact = a.vecmat(&x).unwrap();
            let x_norm = x.iter().map(|v| v * v).sum::<f32>().sqrt();
            let col_norm = (0..r)
                .map(|j| a.column(j).iter().map(|v| v * v).sum::<f32>().sqrt())
                .fold(0.0, f32::max);
            for mixed in [false, true] {
                let q = quantize_matrix_columns(&a, mixed);
                let approx = quantized_vecmat(&x, &q).unwrap();
                let err = exact
                    .iter()
                    .zip(&approx)
                    .map(|(e, a)| (e - a).abs())
                    .fold(0.0, f32::max);
                assert!(err <= 0.05 * x_norm * col_norm, "err {err} d {d} r {r}");
            }
        }
    }

    #[test]
    fn mixed_precision_is_exact_on_head_only_vectors() {
        let a = quantize_matrix_columns(&DenseMatrix::gaussian(9, 5, 3), true);
        let mut x = vec![0.0f32; 9];
        x[0] = -2.75;
        let out = quantized_vecmat(&x, &a).unwrap();
        let want: Vec<f32> = a.head_row().unwrap().iter().map(|v| v * -2.75).collect();
        assert_eq!(out, want);
    }

    #[test]
    fn rotation_reduces_error_on_spiky_vectors() {
        let dim = 64;
        let rot = random_rotation(dim, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut plain, mut rotated) = (0.0f64, 0.0f64);
        for _ in 0..1000 {
            let mut x: Vec<f32> = (0..dim).map(|_| rng.random_range(-0.02..0.02)).collect();
            x[rng.random_range(0..dim)] = 10.0;
            let y: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let exact: f32 = x.iter().zip(&y).map(|(a, b)| a * b).sum();

            let qx = quantize_vector(&x, false).dequantize();
            let e1: f32 = qx.iter().zip(&y).map(|(a, b)| a * b).sum::<f32>() - exact;

            // ⟨Rx, Ry⟩ = ⟨x, y⟩ for orthogonal R
            let rt = rot.transpose();
            let rx = rt.vecmat(&x).unwrap();
            let ry = rt.vecmat(&y).unwrap();
            let qrx = quantize_vector(&rx, false).dequantize();
            let e2: f32 = qrx.iter().zip(&ry).map(|(a, b)| a * b).sum::<f32>() - exact;

            plain += f64::from(e1 * e1);
            rotated += f64::from(e2 * e2);
        }
        assert!(rotated < plain, "rotated {rotated} vs plain {plain}");
    }

    proptest! {
        #[test]
        fn vector_round_trip_half_step(x in prop::collection::vec(-1e3f32..1e3, 1..64)) {
            let q = quantize_vector(&x, false);
            let absmax = x.iter().fold(0.0f32, |m, v| m.max(v.abs()));
            let back = q.dequantize();
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= absmax / 254.0 * (1.0 + 1e-5) + 1e-30);
            }
            prop_assert!(q.values.iter().all(|&v| v >= -127));
            prop_assert_eq!(quantize_vector(&x, false), q);
        }

        #[test]
        fn gemv_matches_signed_loop(rows in 1usize..128, cols in 1usize..32, seed in 0u64..1000) {
            let m = quantize_matrix_columns(&DenseMatrix::gaussian(rows, cols, seed), false);
            let x = quantize_vector(&DenseMatrix::gaussian(1, rows, seed + 1).into_vec(), false);
            prop_assert_eq!(int8_gemv(&x, &m).unwrap(), naive_signed(&x.values, &m));
        }
    }
}
