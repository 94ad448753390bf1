//! Dense linear algebra kernels.
//!
//! Storage is row-major `f32`. The decompositions (Jacobi SVD, randomized
//! SVD, QR) run on `f64` working copies and convert back on output, so every
//! result is reproducible for a fixed build and seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix of i.i.d. standard normal entries.
    pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        let n = if self.cols == 0 { 0 } else { self.rows };
        self.data.chunks_exact(cols).take(n)
    }

    pub fn column(&self, j: usize) -> Vec<f32> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// New matrix holding the given rows, in order.
    pub fn select_rows(&self, ids: &[usize]) -> Self {
        let mut data = Vec::with_capacity(ids.len() * self.cols);
        for &i in ids {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: ids.len(),
            cols: self.cols,
            data,
        }
    }

    /// First `n` columns.
    pub fn leading_columns(&self, n: usize) -> Self {
        assert!(n <= self.cols);
        Self::from_fn(self.rows, n, |i, j| self.get(i, j))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f32 {
        self.data
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt() as f32
    }

    pub fn scale(&mut self, factor: f32) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// Entrywise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(format!(
                "cannot subtract {}x{} from {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Row vector times matrix: `out = xᵀ · self`.
    pub fn vecmat(&self, x: &[f32]) -> Result<Vec<f32>> {
        if x.len() != self.rows {
            return Err(Error::shape(format!(
                "vector of length {} times {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = vec![0.0f32; self.cols];
        vecmat_into(x, self, &mut out);
        Ok(out)
    }
}

/// `out = xᵀ · m`; lengths are the caller's responsibility.
pub(crate) fn vecmat_into(x: &[f32], m: &DenseMatrix, out: &mut [f32]) {
    debug_assert_eq!(x.len(), m.rows);
    debug_assert_eq!(out.len(), m.cols);
    out.iter_mut().for_each(|v| *v = 0.0);
    for (&xi, row) in x.iter().zip(m.row_iter()) {
        if xi == 0.0 {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(row) {
            *o += xi * a;
        }
    }
}

/// Inner product with eight fixed accumulation lanes.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (ca, cb) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] += ca[l] * cb[l];
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    acc.iter().sum::<f32>() + tail
}

/// Squared Euclidean distance, same lane structure as [`dot`].
#[inline]
pub fn squared_l2(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (ca, cb) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            let d = ca[l] - cb[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..a.len() {
        let d = a[i] - b[i];
        tail += d * d;
    }
    acc.iter().sum::<f32>() + tail
}

#[inline]
pub fn squared_norm(a: &[f32]) -> f32 {
    dot(a, a)
}

/// Scales `v` to unit Euclidean norm in place; zero vectors are left alone.
pub fn normalize(v: &mut [f32]) {
    let n = squared_norm(v).sqrt();
    if n > 0.0 {
        let inv = 1.0 / n;
        v.iter_mut().for_each(|x| *x *= inv);
    }
}

/// Standard matrix product `a · b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in orow.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `a · bᵀ` without materializing the transpose.
pub fn matmul_transposed(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.cols {
        return Err(Error::shape(format!(
            "cannot multiply {}x{} by transpose of {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = DenseMatrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = dot(arow, b.row(j));
        }
    }
    Ok(out)
}

/// Thin singular value decomposition `m ≈ u · diag(singular_values) · vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub singular_values: Vec<f32>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `u · diag(s) · vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.singular_values) {
                *v *= s;
            }
        }
        matmul_transposed(&us, &self.v).expect("factor shapes agree")
    }
}

/// Oversampling and power iteration counts for [`randomized_svd`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvdParams {
    pub oversample: usize,
    pub power_iters: usize,
}

impl Default for SvdParams {
    // Two power iterations leave errors near 1e-2 on cluster-sized Y = XCᵀ
    // whose spectrum decays slowly; four bring them to about 1e-4.
    fn default() -> Self {
        Self {
            oversample: 10,
            power_iters: 4,
        }
    }
}

/// Rank-`rank` truncated SVD by randomized range finding with subspace
/// (power) iteration, followed by an exact SVD of the small projected matrix.
pub fn randomized_svd(
    m: &DenseMatrix,
    rank: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<SvdFactors> {
    let min_dim = m.rows.min(m.cols);
    if rank == 0 || rank > min_dim {
        return Err(Error::param(format!(
            "rank {rank} outside 1..={min_dim} for a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let sketch = (rank + oversample).min(min_dim);
    let a = Mat64::from_dense(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let omega = Mat64::gaussian(a.cols, sketch, &mut rng);
    let mut q = a.mul(&omega);
    orthonormalize_columns(&mut q, &mut rng);
    for _ in 0..power_iters {
        let mut z = a.tmul(&q);
        orthonormalize_columns(&mut z, &mut rng);
        q = a.mul(&z);
        orthonormalize_columns(&mut q, &mut rng);
    }

    // b = qᵀ a is sketch x cols; its SVD lifts back through q.
    let b = q.tmul(&a);
    let small = jacobi_svd64(&b);
    let u = q.mul(&small.u);

    Ok(SvdFactors {
        u: u.leading_columns_dense(rank),
        singular_values: small.s[..rank].iter().map(|&s| s as f32).collect(),
        v: small.v.leading_columns_dense(rank),
    })
}

/// Full thin SVD by one-sided Jacobi rotations; `min(rows, cols)` factors.
pub fn jacobi_svd(m: &DenseMatrix) -> SvdFactors {
    let f = jacobi_svd64(&Mat64::from_dense(m));
    let k = f.s.len();
    SvdFactors {
        u: f.u.leading_columns_dense(k),
        singular_values: f.s.iter().map(|&s| s as f32).collect(),
        v: f.v.leading_columns_dense(k),
    }
}

/// Moore–Penrose pseudoinverse; singular values below `rcond · σ_max` are
/// treated as zero.
pub fn pseudoinverse(m: &DenseMatrix, rcond: f32) -> DenseMatrix {
    let f = jacobi_svd64(&Mat64::from_dense(m));
    pinv_from_svd(&f, m.rows, m.cols, f64::from(rcond)).to_dense()
}

pub const DEFAULT_RCOND: f32 = 1e-5;

fn pinv_from_svd(f: &Svd64, rows: usize, cols: usize, rcond: f64) -> Mat64 {
    let smax = f.s.first().copied().unwrap_or(0.0);
    let mut out = Mat64::zeros(cols, rows);
    if smax <= 0.0 {
        return out;
    }
    let cutoff = rcond * smax;
    for (k, &s) in f.s.iter().enumerate() {
        if s <= cutoff {
            break;
        }
        let inv = 1.0 / s;
        for i in 0..cols {
            let vik = f.v.get(i, k) * inv;
            if vik == 0.0 {
                continue;
            }
            for j in 0..rows {
                out.data[i * rows + j] += vik * f.u.get(j, k);
            }
        }
    }
    out
}

/// Least-squares solution `m† · rhs`, computed without forming `m†`.
pub fn pinv_solve(m: &DenseMatrix, rhs: &DenseMatrix, rcond: f32) -> Result<DenseMatrix> {
    if m.rows != rhs.rows {
        return Err(Error::shape(format!(
            "pseudoinverse of {}x{} applied to {}x{}",
            m.rows, m.cols, rhs.rows, rhs.cols
        )));
    }
    let f = jacobi_svd64(&Mat64::from_dense(m));
    let b = Mat64::from_dense(rhs);
    let smax = f.s.first().copied().unwrap_or(0.0);
    let mut out = Mat64::zeros(m.cols, rhs.cols);
    if smax <= 0.0 {
        return Ok(out.to_dense());
    }
    let cutoff = f64::from(rcond) * smax;
    // out = V · diag(1/s) · (Uᵀ b)
    let utb = f.u.tmul(&b);
    for (k, &s) in f.s.iter().enumerate() {
        if s <= cutoff {
            break;
        }
        let inv = 1.0 / s;
        for i in 0..m.cols {
            let vik = f.v.get(i, k) * inv;
            for j in 0..rhs.cols {
                out.data[i * rhs.cols + j] += vik * utb.get(k, j);
            }
        }
    }
    Ok(out.to_dense())
}

/// Seeded orthogonal matrix: the Q factor of a Gaussian matrix with the
/// convention that R has a positive diagonal.
pub fn random_rotation(dim: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Mat64::gaussian(dim, dim, &mut rng);
    // Gram–Schmidt produces exactly the positive-diagonal QR convention.
    orthonormalize_columns(&mut g, &mut rng);
    g.to_dense()
}

/// The top-`s` right singular vectors of `gram_source` as a `cols x s`
/// matrix, i.e. the leading eigenvectors of `gram_sourceᵀ · gram_source`.
pub fn top_eigenvectors(gram_source: &DenseMatrix, s: usize, seed: u64) -> Result<DenseMatrix> {
    let d = gram_source.cols;
    if s == 0 || s > d {
        return Err(Error::param(format!(
            "cannot take {s} eigenvectors of a {d}-dimensional Gram matrix"
        )));
    }
    let x = Mat64::from_dense(gram_source);
    let gram = x.tmul(&x);
    if d <= EXACT_EIGEN_MAX_DIM {
        let f = jacobi_svd64(&gram);
        return Ok(f.v.leading_columns_dense(s));
    }
    let f = randomized_svd(&gram.to_dense(), s, 10, 6, seed)?;
    Ok(f.v)
}

/// Above this dimension the Gram eigenproblem switches to the randomized solver.
const EXACT_EIGEN_MAX_DIM: usize = 384;

// ---------------------------------------------------------------------------
// f64 working storage

#[derive(Debug, Clone)]
pub(crate) struct Mat64 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat64 {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn from_dense(m: &DenseMatrix) -> Self {
        Self {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect(),
        }
    }

    fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }

    fn leading_columns_dense(&self, n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, n, |i, j| self.get(i, j) as f32)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// self · other
    fn mul(&self, other: &Mat64) -> Mat64 {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Mat64::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// selfᵀ · other
    fn tmul(&self, other: &Mat64) -> Mat64 {
        debug_assert_eq!(self.rows, other.rows);
        let mut out = Mat64::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = &self.data[k * self.cols..(k + 1) * self.cols];
            let brow = &other.data[k * other.cols..(k + 1) * other.cols];
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    fn transpose(&self) -> Mat64 {
        let mut t = Mat64::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    fn to_columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).collect())
            .collect()
    }

    fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Mat64 {
        let mut m = Mat64::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m.data[i * cols.len() + j] = v;
            }
        }
        m
    }
}

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt with one reorthogonalization pass. Columns that
/// collapse numerically are replaced by fresh Gaussian directions, so the
/// result always has orthonormal columns (requires `cols <= rows`).
fn orthonormalize_columns(m: &mut Mat64, rng: &mut ChaCha8Rng) {
    assert!(m.cols <= m.rows, "cannot orthonormalize more columns than rows");
    let mut cols = m.to_columns();
    let scale = cols
        .iter()
        .map(|c| dot64(c, c).sqrt())
        .fold(0.0f64, f64::max)
        .max(1.0);
    for j in 0..cols.len() {
        let mut attempts = 0;
        loop {
            let (done, rest) = cols.split_at_mut(j);
            let v = &mut rest[0];
            let before = dot64(v, v).sqrt();
            for _ in 0..2 {
                for q in done.iter() {
                    let p = dot64(q, v);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
                }
            }
            let norm = dot64(v, v).sqrt();
            let reference = if attempts == 0 { scale } else { before };
            if norm > 1e-10 * reference && norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
                break;
            }
            attempts += 1;
            assert!(attempts < 32, "failed to complete an orthonormal basis");
            for x in v.iter_mut() {
                *x = StandardNormal.sample(rng);
            }
        }
    }
    *m = Mat64::from_columns(m.rows, &cols);
}

pub(crate) struct Svd64 {
    u: Mat64,
    s: Vec<f64>,
    v: Mat64,
}

fn jacobi_svd64(a: &Mat64) -> Svd64 {
    if a.rows < a.cols {
        let t = jacobi_svd64(&a.transpose());
        return Svd64 {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let n = a.cols;
    let mut w = a.to_columns();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    const MAX_SWEEPS: usize = 80;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot64(&w[i], &w[i]);
                let beta = dot64(&w[j], &w[j]);
                let gamma = dot64(&w[i], &w[j]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, i, j, c, s);
                rotate_pair(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.iter().map(|c| dot64(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps lower index first on ties
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let smax = norms.iter().copied().fold(0.0f64, f64::max);
    let tiny = smax * 1e-13;
    let mut u_cols = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    let mut s = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    for (k, &idx) in order.iter().enumerate() {
        let sigma = norms[idx];
        if sigma > tiny && sigma > 0.0 {
            u_cols.push(w[idx].iter().map(|x| x / sigma).collect::<Vec<f64>>());
            s.push(sigma);
        } else {
            u_cols.push(vec![0.0; a.rows]);
            degenerate.push(k);
            s.push(0.0);
        }
        v_cols.push(v[idx].clone());
    }
    complete_basis(&mut u_cols, &degenerate, a.rows);

    Svd64 {
        u: Mat64::from_columns(a.rows, &u_cols),
        s,
        v: Mat64::from_columns(n, &v_cols),
    }
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(j);
    for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills the listed (zero) columns with unit vectors orthogonal to all others,
/// drawing candidates from the standard basis in order.
fn complete_basis(cols: &mut [Vec<f64>], missing: &[usize], dim: usize) {
    let mut candidate = 0usize;
    for &k in missing {
        loop {
            assert!(candidate < dim, "basis completion ran out of candidates");
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (idx, q) in cols.iter().enumerate() {
                    if idx == k {
                        continue;
                    }
                    let p = dot64(q, &e);
                    e.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
                }
            }
            let norm = dot64(&e, &e).sqrt();
            if norm > 1e-6 {
                e.iter_mut().for_each(|x| *x /= norm);
                cols[k] = e;
                break;
            }
        }
    }
}
