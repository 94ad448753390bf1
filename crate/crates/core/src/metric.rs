use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{dot, squared_l2};

/// Dissimilarity measure. All three reduce to inner products for scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Squared Euclidean distance (ranking-equivalent to Euclidean).
    Euclidean,
    /// Negative inner product (MIPS).
    #[serde(rename = "ip")]
    InnerProduct,
    /// `1 - cos`; vectors are normalized before use.
    Cosine,
}

impl Metric {
    /// Exact dissimilarity, lower is closer. Cosine expects unit-norm inputs.
    #[inline]
    pub fn dissimilarity(self, x: &[f32], c: &[f32]) -> f32 {
        match self {
            Metric::Euclidean => squared_l2(x, c),
            Metric::InnerProduct => -dot(x, c),
            Metric::Cosine => 1.0 - dot(x, c),
        }
    }

    pub fn normalizes_inputs(self) -> bool {
        matches!(self, Metric::Cosine)
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Metric::Euclidean => 0,
            Metric::InnerProduct => 1,
            Metric::Cosine => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Metric::Euclidean),
            1 => Some(Metric::InnerProduct),
            2 => Some(Metric::Cosine),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::InnerProduct => "ip",
            Metric::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "ip" | "dot" | "inner_product" | "mips" => Ok(Metric::InnerProduct),
            "cosine" | "angular" => Ok(Metric::Cosine),
            other => Err(Error::Param(format!("unknown metric '{other}'"))),
        }
    }
}
