//! Clustering-based approximate nearest neighbor search whose candidate
//! scoring stage is a per-cluster reduced-rank regression model, optionally
//! evaluated with int8 vector–matrix products.
//!
//! The pipeline:
//!
//! 1. project queries with `W_s` (top eigenvectors of the training Gram
//!    matrix, pre-multiplied by a random rotation),
//! 2. route to the `w` nearest k-means centroids,
//! 3. score every member of those clusters with `(x̃ᵀA)·B`,
//! 4. keep the `t` best, optionally re-rank them with exact distances, and
//!    return the top `k`.
//!
//! ```no_run
//! use rrr_ann::{bench, IndexConfig, Metric, QueryParams, RrrIndex};
//!
//! let data = bench::synth_dataset(10_000, 100, 64, bench::SynthKind::Gaussian, 7);
//! let cfg = IndexConfig::for_corpus(Metric::Euclidean, &data.corpus);
//! let index = RrrIndex::build(&data.corpus, None, &cfg).unwrap();
//! let hits = index.query(data.queries.row(0), &QueryParams::new(10, 8, 200)).unwrap();
//! println!("{:?}", hits.ids);
//! ```

pub mod bench;
pub mod cluster;
pub mod error;
pub mod index;
pub mod linalg;
pub mod metric;
pub mod quantize;
pub mod rrr;

pub use error::{Error, ErrorCategory, Result};
pub use index::{IndexConfig, QueryParams, QueryResult, RrrIndex, ScoringMode};
pub use linalg::DenseMatrix;
pub use metric::Metric;
pub use rrr::{LocalTrain, RrrConfig, TrainSource};
