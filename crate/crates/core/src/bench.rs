//! Datasets, the brute-force oracle, recall, synthetic data and sweeps.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::index::{IndexConfig, QueryParams, RrrIndex, ScoringMode};
use crate::linalg::{matmul, normalize, random_rotation, DenseMatrix};
use crate::metric::Metric;
use crate::rrr::{RrrConfig, TrainSource};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub corpus: DenseMatrix,
    pub queries: DenseMatrix,
    /// Sample from the query distribution, for query-sample training.
    pub train: Option<DenseMatrix>,
    pub metric: Metric,
    /// Exact neighbor ids per query, nearest first.
    pub ground_truth: Option<Vec<Vec<usize>>>,
}

impl Dataset {
    /// Computes exact neighbors for the queries and stores them.
    pub fn with_ground_truth(mut self, k: usize) -> Result<Self> {
        self.ground_truth = Some(brute_force_knn(&self.corpus, &self.queries, k, self.metric)?);
        Ok(self)
    }
}

fn record_error(kind: &'static str, record: usize, offset: usize, message: impl std::fmt::Display) -> Error {
    Error::Format {
        section: kind,
        offset: offset as u64,
        message: format!("record {record}: {message}"),
    }
}

/// Splits a `.fvecs`/`.ivecs` byte stream into `(dim, payload)` records.
fn parse_vecs<'a>(bytes: &'a [u8], kind: &'static str) -> Result<(usize, Vec<&'a [u8]>)> {
    let mut records = Vec::new();
    let mut dim = None;
    let mut pos = 0;
    while pos < bytes.len() {
        let i = records.len();
        if bytes.len() - pos < 4 {
            return Err(record_error(kind, i, pos, "truncated dimension field"));
        }
        let d = i32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        if d <= 0 {
            return Err(record_error(kind, i, pos, format!("invalid dimension {d}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(first) if first != d => {
                return Err(record_error(kind, i, pos, format!("dimension {d}, expected {first}")))
            }
            _ => {}
        }
        let end = pos + 4 + 4 * d;
        if end > bytes.len() {
            return Err(record_error(kind, i, pos, "truncated payload"));
        }
        records.push(&bytes[pos + 4..end]);
        pos = end;
    }
    Ok((dim.unwrap_or(0), records))
}

pub fn parse_fvecs(bytes: &[u8]) -> Result<DenseMatrix> {
    let (dim, records) = parse_vecs(bytes, "fvecs")?;
    let data = records
        .iter()
        .flat_map(|r| r.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    DenseMatrix::from_vec(records.len(), dim, data)
}

pub fn parse_ivecs(bytes: &[u8]) -> Result<Vec<Vec<usize>>> {
    let (_, records) = parse_vecs(bytes, "ivecs")?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.chunks_exact(4)
                .map(|c| {
                    let v = i32::from_le_bytes(c.try_into().unwrap());
                    usize::try_from(v).map_err(|_| Error::Data(format!("ivecs record {i}: negative id {v}")))
                })
                .collect()
        })
        .collect()
}

pub fn load_fvecs(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_fvecs(&fs::read(path)?)
}

pub fn load_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<usize>>> {
    parse_ivecs(&fs::read(path)?)
}

pub fn write_fvecs(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in m.row_iter() {
        w.write_all(&(row.len() as i32).to_le_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ivecs(path: impl AsRef<Path>, lists: &[Vec<usize>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (i, list) in lists.iter().enumerate() {
        if list.is_empty() {
            return Err(Error::param(format!("ivecs record {i} is empty")));
        }
        w.write_all(&(list.len() as i32).to_le_bytes())?;
        for &id in list {
            let id = i32::try_from(id).map_err(|_| Error::param(format!("id {id} does not fit in i32")))?;
            w.write_all(&id.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Exact `k` nearest neighbors of every query, nearest first, ties broken
/// by the lower id.
pub fn brute_force_knn(corpus: &DenseMatrix, queries: &DenseMatrix, k: usize, metric: Metric) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > corpus.rows() {
        return Err(Error::param(format!(
            "k = {k} for a corpus of {} points",
            corpus.rows()
        )));
    }
    if queries.rows() > 0 && queries.cols() != corpus.cols() {
        return Err(Error::shape(format!(
            "queries of dimension {}, corpus {}",
            queries.cols(),
            corpus.cols()
        )));
    }
    let prepared;
    let corpus = if metric.normalizes_inputs() {
        let mut c = corpus.clone();
        for i in 0..c.rows() {
            normalize(c.row_mut(i));
        }
        prepared = c;
        &prepared
    } else {
        corpus
    };
    Ok((0..queries.rows())
        .into_par_iter()
        .map(|qi| {
            let mut q = queries.row(qi).to_vec();
            if metric.normalizes_inputs() {
                normalize(&mut q);
            }
            let mut all: Vec<(f32, usize)> = corpus
                .row_iter()
                .enumerate()
                .map(|(i, c)| (metric.dissimilarity(&q, c), i))
                .collect();
            let cmp = |a: &(f32, usize), b: &(f32, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < all.len() {
                all.select_nth_unstable_by(k - 1, cmp);
                all.truncate(k);
            }
            all.sort_unstable_by(cmp);
            all.into_iter().map(|(_, i)| i).collect()
        })
        .collect())
}

/// Fraction of the first `k` true neighbors found among the first `k`
/// results.
pub fn recall_at_k(result: &[usize], truth: &[usize], k: usize) -> f32 {
    if k == 0 {
        return 0.0;
    }
    let truth: HashSet<usize> = truth.iter().take(k).copied().collect();
    let hits = result.iter().take(k).collect::<HashSet<_>>().into_iter().filter(|i| truth.contains(i)).count();
    hits as f32 / k as f32
}

pub fn mean_recall(results: &[Vec<usize>], truth: &[Vec<usize>], k: usize) -> f32 {
    if results.is_empty() {
        return 0.0;
    }
    let total: f64 = results
        .iter()
        .zip(truth)
        .map(|(r, t)| f64::from(recall_at_k(r, t, k)))
        .sum();
    (total / results.len() as f64) as f32
}

/// Ground truth stored next to the corpus file, recomputed if missing or
/// unusable.
pub fn cached_ground_truth(
    corpus_path: &Path,
    corpus: &DenseMatrix,
    queries: &DenseMatrix,
    k: usize,
    metric: Metric,
) -> Result<Vec<Vec<usize>>> {
    let path = ground_truth_path(corpus_path, k, metric);
    if let Ok(gt) = load_ivecs(&path) {
        if gt.len() == queries.rows() && gt.iter().all(|g| g.len() == k && g.iter().all(|&i| i < corpus.rows())) {
            return Ok(gt);
        }
    }
    let gt = brute_force_knn(corpus, queries, k, metric)?;
    write_ivecs(&path, &gt)?;
    Ok(gt)
}

pub fn ground_truth_path(corpus_path: &Path, k: usize, metric: Metric) -> PathBuf {
    let mut name = corpus_path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".{metric}.k{k}.gt.ivecs"));
    corpus_path.with_file_name(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Gaussian,
    /// Isotropic blobs around this many well separated centers.
    Clustered(usize),
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "gaussian" {
            return Ok(SynthKind::Gaussian);
        }
        let blobs = s
            .strip_prefix("clustered")
            .map(|rest| rest.trim_start_matches([':', '=']))
            .ok_or_else(|| Error::param(format!("unknown dataset kind '{s}'")))?;
        let n = if blobs.is_empty() {
            10
        } else {
            blobs.parse().map_err(|_| Error::param(format!("bad blob count in '{s}'")))?
        };
        if n == 0 {
            return Err(Error::param("need at least one blob"));
        }
        Ok(SynthKind::Clustered(n))
    }
}

const BLOB_SPREAD: f32 = 8.0;

fn gaussian_rows(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, d, |_, _| rng.sample(StandardNormal))
}

/// Points drawn around `blobs` centers; returns the points and their blob.
pub fn synth_blobs(m: usize, d: usize, blobs: usize, seed: u64) -> (DenseMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = gaussian_rows(&mut rng, blobs.max(1), d);
    let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..blobs.max(1))).collect();
    let mut points = gaussian_rows(&mut rng, m, d);
    for (i, &b) in labels.iter().enumerate() {
        for (p, &c) in points.row_mut(i).iter_mut().zip(centers.row(b)) {
            *p += BLOB_SPREAD * c;
        }
    }
    (points, labels)
}

/// Deterministic synthetic corpus and queries (Euclidean metric).
pub fn synth_dataset(m: usize, n_queries: usize, d: usize, kind: SynthKind, seed: u64) -> Dataset {
    let (corpus, queries) = match kind {
        SynthKind::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = gaussian_rows(&mut rng, m, d);
            (c, gaussian_rows(&mut rng, n_queries, d))
        }
        SynthKind::Clustered(blobs) => {
            // same centers for both; queries come from a separate point stream
            let (all, _) = synth_blobs(m + n_queries, d, blobs, seed);
            let ids: Vec<usize> = (0..m + n_queries).collect();
            (all.select_rows(&ids[..m]), all.select_rows(&ids[m..]))
        }
    };
    Dataset {
        corpus,
        queries,
        train: None,
        metric: Metric::Euclidean,
        ground_truth: None,
    }
}

/// Corpus and queries from different distributions: an anisotropic Gaussian
/// corpus, and queries from a second anisotropic Gaussian that is rotated
/// and shifted. `train` holds extra draws from the query distribution.
pub fn synth_shifted(m: usize, n_queries: usize, n_train: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f32> = (0..d).map(|i| 1.0 / (1.0 + i as f32 / 4.0)).collect();
    let draw = |rng: &mut ChaCha8Rng, rows: usize| {
        DenseMatrix::from_fn(rows, d, |_, j| scales[j] * rng.sample::<f32, _>(StandardNormal))
    };
    let corpus = draw(&mut rng, m);
    let raw_queries = draw(&mut rng, n_queries + n_train);
    let rotation = random_rotation(d, rng.random());
    let shift: Vec<f32> = (0..d).map(|_| 0.5 * rng.sample::<f32, _>(StandardNormal)).collect();
    let mut q = matmul(&raw_queries, &rotation).expect("square rotation");
    for i in 0..q.rows() {
        for (v, s) in q.row_mut(i).iter_mut().zip(&shift) {
            *v += s;
        }
    }
    let ids: Vec<usize> = (0..q.rows()).collect();
    Dataset {
        corpus,
        queries: q.select_rows(&ids[..n_queries]),
        train: Some(q.select_rows(&ids[n_queries..])),
        metric: Metric::InnerProduct,
        ground_truth: None,
    }
}

/// Parameter grid for [`sweep`], read from TOML.
///
/// ```toml
/// metric = "euclidean"
/// seed = 0
/// clusters = [100]
/// reduced_dim = [0, 64]   # 0 disables reduction
/// rank = [16, 32]
/// quantize = [true]
/// k = 100
/// w = [5, 10]
/// t = [100, 500]
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default = "default_metric")]
    pub metric: Metric,
    #[serde(default)]
    pub seed: u64,
    pub clusters: Vec<usize>,
    #[serde(default = "zero_list")]
    pub reduced_dim: Vec<usize>,
    pub rank: Vec<usize>,
    #[serde(default = "true_list")]
    pub quantize: Vec<bool>,
    #[serde(default)]
    pub balance: Option<usize>,
    #[serde(default = "default_k")]
    pub k: usize,
    pub w: Vec<usize>,
    pub t: Vec<usize>,
    #[serde(default = "default_true")]
    pub rerank: bool,
}

fn default_metric() -> Metric {
    Metric::Euclidean
}
fn zero_list() -> Vec<usize> {
    vec![0]
}
fn true_list() -> Vec<bool> {
    vec![true]
}
fn default_k() -> usize {
    100
}
fn default_true() -> bool {
    true
}

impl SweepGrid {
    pub fn from_toml(text: &str) -> Result<Self> {
        let grid: Self = toml::from_str(text).map_err(|e| Error::param(format!("sweep grid: {e}")))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("clusters", self.clusters.len()),
            ("reduced_dim", self.reduced_dim.len()),
            ("rank", self.rank.len()),
            ("quantize", self.quantize.len()),
            ("w", self.w.len()),
            ("t", self.t.len()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, n)| *n == 0) {
            return Err(Error::param(format!("sweep grid list '{name}' is empty")));
        }
        if self.k == 0 {
            return Err(Error::param("k must be positive"));
        }
        Ok(())
    }

    fn build_configs(&self, dim: usize) -> Vec<IndexConfig> {
        let mut out = Vec::new();
        for &clusters in &self.clusters {
            for &s in &self.reduced_dim {
                for &rank in &self.rank {
                    for &quantize in &self.quantize {
                        let mut cfg = IndexConfig::with_defaults(self.metric, clusters, dim).with_seed(self.seed);
                        cfg.clusters = clusters;
                        cfg.balance = self.balance;
                        cfg.rerank = self.rerank;
                        cfg.scoring_mode = ScoringMode::Rrr;
                        cfg.rrr = RrrConfig {
                            rank,
                            reduced_dim: (s > 0).then_some(s),
                            quantize,
                            seed: self.seed,
                            ..RrrConfig::default()
                        };
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

/// One CSV row. Measurements are `NaN`/0 when `error` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub clusters: usize,
    /// 0 when reduction is off.
    pub reduced_dim: usize,
    pub rank: usize,
    pub quantized: bool,
    pub w: usize,
    pub t: usize,
    pub k: usize,
    pub recall: f32,
    pub mean_latency_us: f64,
    pub qps: f64,
    pub index_bytes: usize,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "clusters,reduced_dim,rank,quantized,w,t,k,recall,mean_latency_us,qps,index_bytes,error";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.6},{:.3},{:.1},{},{}",
                r.clusters,
                r.reduced_dim,
                r.rank,
                r.quantized,
                r.w,
                r.t,
                r.k,
                r.recall,
                r.mean_latency_us,
                r.qps,
                r.index_bytes,
                csv_field(r.error.as_deref().unwrap_or(""))
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Gnuplot script drawing QPS against recall from a sweep CSV.
pub fn gnuplot_script(csv_path: &str, png_path: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set output '{png_path}'\n\
         set xlabel 'recall'\n\
         set ylabel 'queries per second'\n\
         set logscale y\n\
         set key off\n\
         plot '{csv_path}' using 8:10 every ::1 with points pointtype 7\n"
    )
}

/// Runs all queries sequentially `repeats` times and returns the results of
/// the first run plus the fastest run's wall time.
pub fn timed_queries(index: &RrrIndex, queries: &DenseMatrix, p: &QueryParams, repeats: usize) -> Result<(Vec<Vec<usize>>, Duration)> {
    let mut best = Duration::MAX;
    let mut ids = Vec::new();
    for rep in 0..repeats.max(1) {
        let start = Instant::now();
        let mut run = Vec::with_capacity(queries.rows());
        for q in queries.row_iter() {
            run.push(index.query(q, p)?.ids);
        }
        best = best.min(start.elapsed());
        if rep == 0 {
            ids = run;
        }
    }
    Ok((ids, best))
}

/// Builds every configuration in the grid once and measures every `(w, t)`
/// pair against it. Failures become rows with `error` set.
pub fn sweep(ds: &Dataset, grid: &SweepGrid, repeats: usize) -> Result<SweepReport> {
    grid.validate()?;
    let truth = match &ds.ground_truth {
        Some(gt) => {
            if gt.len() != ds.queries.rows() || gt.iter().any(|g| g.len() < grid.k) {
                return Err(Error::Data(format!(
                    "ground truth does not cover {} queries with k = {}",
                    ds.queries.rows(),
                    grid.k
                )));
            }
            gt.clone()
        }
        None => brute_force_knn(&ds.corpus, &ds.queries, grid.k, grid.metric)?,
    };
    let mut report = SweepReport::default();
    for cfg in grid.build_configs(ds.corpus.cols()) {
        let train = match (&ds.train, cfg.rrr.train_source) {
            (Some(t), TrainSource::QuerySample) => Some(t),
            _ => None,
        };
        let built = RrrIndex::build(&ds.corpus, train, &cfg);
        let bytes = built.as_ref().map(|i| i.serialize().len()).unwrap_or(0);
        for &w in &grid.w {
            for &t in &grid.t {
                let mut row = SweepRow {
                    clusters: cfg.clusters,
                    reduced_dim: cfg.rrr.reduced_dim.unwrap_or(0),
                    rank: cfg.rrr.rank,
                    quantized: cfg.rrr.quantize,
                    w,
                    t,
                    k: grid.k,
                    recall: f32::NAN,
                    mean_latency_us: f64::NAN,
                    qps: f64::NAN,
                    index_bytes: bytes,
                    error: None,
                };
                let params = QueryParams {
                    k: grid.k,
                    w,
                    t,
                    rerank: grid.rerank,
                };
                let measured = built
                    .as_ref()
                    .map_err(|e| e.to_string())
                    .and_then(|index| timed_queries(index, &ds.queries, &params, repeats).map_err(|e| e.to_string()));
                match measured {
                    Ok((ids, elapsed)) => {
                        let n = ds.queries.rows().max(1) as f64;
                        row.recall = mean_recall(&ids, &truth, grid.k);
                        row.mean_latency_us = elapsed.as_secs_f64() * 1e6 / n;
                        row.qps = n / elapsed.as_secs_f64().max(1e-12);
                    }
                    Err(e) => row.error = Some(e),
                }
                report.rows.push(row);
            }
        }
    }
    Ok(report)
}
