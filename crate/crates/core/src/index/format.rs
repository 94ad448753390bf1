//! Little-endian binary layout:
//!
//! ```text
//! magic "RRRANN01"
//! header   metric u8, d u32, s u32, r u32, L u32, m u64, flags u32
//! W_s      f32 d x s
//! centroids f32 L x s
//! L records { m_l u32, ids u64 x m_l, [A, B], [norms f32 x m_l] }
//! [corpus  f32 m x d]
//! crc32    u32 over everything before it
//! ```
//!
//! A factor is either dense `f32` (row-major) or quantized:
//! `{ [head_row f32 x cols], col_scales f32 x cols, codes i8 row-major }`.
//! The head row is present only with mixed precision. `A` has shape
//! `s x r_l` and `B` `r_l x m_l` with `r_l = min(r, m_l)`.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::metric::Metric;
use crate::quantize::QuantizedMatrix;
use crate::rrr::{ClusterModel, Factor};

use super::{ClusterSlot, IndexLayout, RrrIndex, ScoringMode};

const MAGIC: &[u8; 8] = b"RRRANN01";

const FLAG_QUANTIZED: u32 = 1;
const FLAG_CORPUS: u32 = 1 << 1;
const FLAG_BALANCED: u32 = 1 << 2;
const FLAG_EXACT_IVF: u32 = 1 << 3;
const FLAG_MIXED: u32 = 1 << 4;
const FLAG_IDENTITY_PROJECTION: u32 = 1 << 5;
const KNOWN_FLAGS: u32 = (1 << 6) - 1;

/// Serialized size of each part of an index, in bytes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Footprint {
    pub header: usize,
    pub projection: usize,
    pub centroids: usize,
    pub ids: usize,
    /// int8 codes of quantized factors.
    pub factor_codes: usize,
    /// Column scales and `f32` head rows of quantized factors.
    pub factor_scales: usize,
    /// Factors stored in `f32`.
    pub dense_factors: usize,
    pub norms: usize,
    pub corpus: usize,
    pub checksum: usize,
}

impl Footprint {
    pub fn total(&self) -> usize {
        self.header
            + self.projection
            + self.centroids
            + self.ids
            + self.factor_codes
            + self.factor_scales
            + self.dense_factors
            + self.norms
            + self.corpus
            + self.checksum
    }

    /// Bytes of the scoring models (factors and their scales).
    pub fn model_bytes(&self) -> usize {
        self.factor_codes + self.factor_scales + self.dense_factors
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f32]) -> usize {
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
        4 * v.len()
    }
}

fn write_factor(w: &mut Writer, f: &Factor, fp: &mut Footprint) {
    match f {
        Factor::Dense(m) => fp.dense_factors += w.f32s(m.as_slice()),
        Factor::Quantized(q) => {
            if let Some(h) = q.head_row() {
                fp.factor_scales += w.f32s(h);
            }
            fp.factor_scales += w.f32s(q.col_scales());
            w.buf.extend(q.values().map(|v| v as u8));
            fp.factor_codes += q.code_bytes();
        }
    }
}

pub(super) fn write_index(index: &RrrIndex) -> (Vec<u8>, Footprint) {
    let lay = &index.layout;
    let mut fp = Footprint::default();
    let mut w = Writer { buf: Vec::new() };

    let mut flags = 0;
    for (on, bit) in [
        (lay.quantized, FLAG_QUANTIZED),
        (index.corpus.is_some(), FLAG_CORPUS),
        (lay.balanced, FLAG_BALANCED),
        (lay.scoring_mode == ScoringMode::ExactIvf, FLAG_EXACT_IVF),
        (lay.mixed_precision, FLAG_MIXED),
        (lay.identity_projection, FLAG_IDENTITY_PROJECTION),
    ] {
        if on {
            flags |= bit;
        }
    }
    w.buf.extend_from_slice(MAGIC);
    w.u8(lay.metric.tag());
    w.u32(lay.dim as u32);
    w.u32(lay.input_dim as u32);
    w.u32(lay.rank as u32);
    w.u32(index.clusters.len() as u32);
    w.u64(lay.num_points as u64);
    w.u32(flags);
    fp.header = w.buf.len();

    fp.projection = w.f32s(index.projection.as_slice());
    fp.centroids = w.f32s(index.centroids.as_slice());

    for slot in &index.clusters {
        let (ids, norms) = match slot {
            ClusterSlot::Model(m) => (&m.point_ids, &m.norm_terms),
            ClusterSlot::Exact { ids, norms } => (ids, norms),
        };
        w.u32(ids.len() as u32);
        for &id in ids {
            w.u64(id as u64);
        }
        fp.ids += 4 + 8 * ids.len();
        if let ClusterSlot::Model(m) = slot {
            write_factor(&mut w, &m.a, &mut fp);
            write_factor(&mut w, &m.b, &mut fp);
        }
        if let Some(n) = norms {
            fp.norms += w.f32s(n);
        }
    }

    if let Some(c) = &index.corpus {
        fp.corpus = w.f32s(c.as_slice());
    }
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    fp.checksum = 4;
    debug_assert_eq!(fp.total(), w.buf.len());
    (w.buf, fp)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            _ => Err(Error::Format {
                section,
                offset: self.pos as u64,
                message: format!(
                    "needs {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            }),
        }
    }

    fn u8(&mut self, section: &'static str) -> Result<u8> {
        Ok(self.take(1, section)?[0])
    }

    fn u32(&mut self, section: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    fn u64(&mut self, section: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, section)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, section: &'static str) -> Result<Vec<f32>> {
        let len = n.checked_mul(4).ok_or_else(|| self.bad(section, "length overflow"))?;
        let raw = self.take(len, section)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize, section: &'static str) -> Result<DenseMatrix> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| self.bad(section, "size overflow"))?;
        DenseMatrix::from_vec(rows, cols, self.f32s(n, section)?)
    }

    fn bad(&self, section: &'static str, message: impl Into<String>) -> Error {
        Error::Format {
            section,
            offset: self.pos as u64,
            message: message.into(),
        }
    }
}

fn read_factor(
    r: &mut Reader<'_>,
    rows: usize,
    cols: usize,
    quantized: bool,
    mixed: bool,
    section: &'static str,
) -> Result<Factor> {
    if !quantized {
        return Ok(Factor::Dense(r.matrix(rows, cols, section)?));
    }
    let head = if mixed && rows > 0 {
        Some(r.f32s(cols, section)?)
    } else {
        None
    };
    let scales = r.f32s(cols, section)?;
    let q_rows = rows - usize::from(head.is_some());
    let n = q_rows
        .checked_mul(cols)
        .ok_or_else(|| r.bad(section, "size overflow"))?;
    let at = r.pos;
    let codes: Vec<i8> = r.take(n, section)?.iter().map(|&b| b as i8).collect();
    QuantizedMatrix::from_parts(rows, cols, head, scales, &codes)
        .map(Factor::Quantized)
        .map_err(|e| Error::Format {
            section,
            offset: at as u64,
            message: e.to_string(),
        })
}

pub(super) fn read_index(bytes: &[u8]) -> Result<RrrIndex> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(8, "magic")?;
    if magic != MAGIC {
        if magic.starts_with(b"RRRANN") {
            return Err(Error::Version(format!(
                "unsupported format version {}",
                String::from_utf8_lossy(&magic[6..])
            )));
        }
        return Err(Error::Format {
            section: "magic",
            offset: 0,
            message: "not an index file".into(),
        });
    }

    let tag = r.u8("header")?;
    let metric = Metric::from_tag(tag).ok_or_else(|| r.bad("header", format!("unknown metric tag {tag}")))?;
    let d = r.u32("header")? as usize;
    let s = r.u32("header")? as usize;
    let rank = r.u32("header")? as usize;
    let clusters = r.u32("header")? as usize;
    let m = usize::try_from(r.u64("header")?).map_err(|_| r.bad("header", "point count too large"))?;
    let flags = r.u32("header")?;
    if flags & !KNOWN_FLAGS != 0 {
        return Err(Error::Version(format!("unknown header flags {flags:#x}")));
    }
    let has = |bit| flags & bit != 0;
    let exact_ivf = has(FLAG_EXACT_IVF);
    let quantized = has(FLAG_QUANTIZED);
    let mixed = has(FLAG_MIXED);
    let identity = has(FLAG_IDENTITY_PROJECTION);
    let has_corpus = has(FLAG_CORPUS);
    if d == 0 || s == 0 || s > d || clusters == 0 || clusters > m {
        return Err(r.bad("header", "inconsistent dimensions"));
    }
    if exact_ivf != (rank == 0) || (exact_ivf && (quantized || !has_corpus)) || (mixed && !quantized) {
        return Err(r.bad("header", "inconsistent flags"));
    }
    if identity && s != d {
        return Err(r.bad("header", "identity projection needs s = d"));
    }

    let projection = r.matrix(d, s, "projection")?;
    let centroids = r.matrix(clusters, s, "centroids")?;

    let euclidean = metric == Metric::Euclidean;
    let mut seen = vec![false; m];
    let mut slots = Vec::with_capacity(clusters);
    for _ in 0..clusters {
        let ml = r.u32("cluster")? as usize;
        if ml == 0 || ml > m {
            return Err(r.bad("cluster", format!("invalid cluster size {ml}")));
        }
        let mut ids = Vec::with_capacity(ml);
        for _ in 0..ml {
            let id = r.u64("cluster ids")?;
            let i = usize::try_from(id).ok().filter(|&i| i < m);
            match i {
                Some(i) if !seen[i] => {
                    seen[i] = true;
                    ids.push(i);
                }
                _ => return Err(r.bad("cluster ids", format!("invalid or repeated id {id}"))),
            }
        }
        let slot = if exact_ivf {
            let norms = if euclidean { Some(r.f32s(ml, "norms")?) } else { None };
            ClusterSlot::Exact { ids, norms }
        } else {
            let rl = rank.min(ml);
            let a = read_factor(&mut r, s, rl, quantized, mixed, "factor A")?;
            let b = read_factor(&mut r, rl, ml, quantized, mixed, "factor B")?;
            let norm_terms = if euclidean { Some(r.f32s(ml, "norms")?) } else { None };
            ClusterSlot::Model(ClusterModel {
                point_ids: ids,
                a,
                b,
                norm_terms,
                exact_fallback: ml < rank,
            })
        };
        slots.push(slot);
    }
    if seen.iter().any(|&s| !s) {
        return Err(r.bad("cluster ids", "some points belong to no cluster"));
    }

    let corpus = if has_corpus {
        Some(r.matrix(m, d, "corpus")?)
    } else {
        None
    };

    let body_end = r.pos;
    let crc = r.u32("checksum")?;
    if r.pos != bytes.len() {
        return Err(Error::Version(format!(
            "{} unexpected bytes after the corpus section",
            bytes.len() - body_end
        )));
    }
    let want = crc32fast::hash(&bytes[..body_end]);
    if crc != want {
        return Err(Error::Format {
            section: "checksum",
            offset: body_end as u64,
            message: format!("checksum mismatch: stored {crc:#010x}, computed {want:#010x}"),
        });
    }

    Ok(RrrIndex {
        layout: IndexLayout {
            metric,
            dim: d,
            input_dim: s,
            rank,
            num_points: m,
            quantized,
            mixed_precision: mixed,
            balanced: has(FLAG_BALANCED),
            scoring_mode: if exact_ivf { ScoringMode::ExactIvf } else { ScoringMode::Rrr },
            identity_projection: identity,
        },
        config: None,
        projection,
        centroids,
        clusters: slots,
        corpus,
    })
}
