//! Feature blocks, their fusion, and the weighted dissimilarity
//!
//! ```text
//! d_w(A, B) = sum_c w_c * ||A_c - B_c|| / sum_c w_c
//! ```
//!
//! taken over the characteristics `c` with a positive weight.

mod extract;
mod ncf;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::CharacteristicKind;

pub use extract::{
    color_histogram_extractor, color_histogram_l1, edge_orientation_extractor,
    generic_thumbnail_extractor, orientation_histogram, text_presence_extractor,
    COLOR_BINS_PER_CHANNEL, COLOR_DIM, EDGE_DIM, GENERIC_DIM, ORIENTATION_BINS,
    TEXT_COVERAGE_THRESHOLD, TEXT_DIM,
};
pub use ncf::{
    import_neural_codes, read_embeddings, save_blocks, write_embeddings, EmbeddingFile, EmbeddingHeader,
    NCF_MAGIC,
};

/// Tolerance on unit norms accepted by index construction.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// One characteristic's feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub kind: CharacteristicKind,
    pub values: Vec<f64>,
}

impl FeatureBlock {
    pub fn new(kind: CharacteristicKind, values: Vec<f64>) -> Self {
        Self { kind, values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Unit norm within [`UNIT_NORM_TOLERANCE`], or exactly zero.
    pub fn is_normalized(&self) -> bool {
        self.is_zero() || (self.norm() - 1.0).abs() <= UNIT_NORM_TOLERANCE
    }
}

/// Euclidean norm, accumulated in f64.
pub fn norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance with a sequential sum of squared differences.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Divides by the Euclidean norm; an all-zero vector stays all-zero.
pub fn l2_normalize(block: &FeatureBlock) -> FeatureBlock {
    let n = block.norm();
    if n == 0.0 {
        return block.clone();
    }
    FeatureBlock::new(block.kind, block.values.iter().map(|v| v / n).collect())
}

/// How fused features are normalized before indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each block to unit length, so every per-kind distance lies in [0, 2].
    #[default]
    PerBlock,
    /// The concatenation of all blocks to unit length.
    WholeVector,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_block" | "per-block" | "block" => Ok(Self::PerBlock),
            "whole_vector" | "whole-vector" | "whole" => Ok(Self::WholeVector),
            other => Err(Error::InvalidConfig(format!("unknown normalization {other:?}"))),
        }
    }
}

/// At most one block per kind, iterated in canonical kind order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FusedFeature {
    blocks: BTreeMap<CharacteristicKind, FeatureBlock>,
}

impl FusedFeature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_blocks(blocks: impl IntoIterator<Item = FeatureBlock>) -> Result<Self> {
        let mut fused = Self::new();
        for b in blocks {
            fused.insert(b)?;
        }
        Ok(fused)
    }

    pub fn insert(&mut self, block: FeatureBlock) -> Result<()> {
        if block.dim() == 0 {
            return Err(Error::Schema(format!("{} block is empty", block.kind)));
        }
        if self.blocks.contains_key(&block.kind) {
            return Err(Error::Schema(format!("two {} blocks in one feature", block.kind)));
        }
        self.blocks.insert(block.kind, block);
        Ok(())
    }

    /// Inserts, replacing any existing block of the same kind.
    pub fn set(&mut self, block: FeatureBlock) {
        self.blocks.insert(block.kind, block);
    }

    pub fn get(&self, kind: CharacteristicKind) -> Option<&FeatureBlock> {
        self.blocks.get(&kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = CharacteristicKind> + '_ {
        self.blocks.keys().copied()
    }

    pub fn blocks(&self) -> impl Iterator<Item = &FeatureBlock> {
        self.blocks.values()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Concatenates the listed kinds in the given order.
    pub fn concat(&self, kinds: &[CharacteristicKind]) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for &k in kinds {
            out.extend_from_slice(&self.get(k).ok_or(Error::MissingBlock(k))?.values);
        }
        Ok(out)
    }

    pub fn normalized(&self, mode: Normalization) -> FusedFeature {
        let blocks = match mode {
            Normalization::PerBlock => self
                .blocks
                .iter()
                .map(|(k, b)| (*k, l2_normalize(b)))
                .collect(),
            Normalization::WholeVector => {
                let total = self
                    .blocks
                    .values()
                    .flat_map(|b| &b.values)
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                self.blocks
                    .iter()
                    .map(|(k, b)| {
                        let values = if total == 0.0 {
                            b.values.clone()
                        } else {
                            b.values.iter().map(|v| v / total).collect()
                        };
                        (*k, FeatureBlock::new(*k, values))
                    })
                    .collect()
            }
        };
        FusedFeature { blocks }
    }
}

/// Normalized characteristic weights (non-negative, summing to one).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryWeights {
    weights: BTreeMap<CharacteristicKind, f64>,
}

impl QueryWeights {
    /// Validates raw weights and rescales them to sum to one. Raw weights
    /// may be on any positive scale (e.g. percentages).
    pub fn new(raw: impl IntoIterator<Item = (CharacteristicKind, f64)>) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for (kind, w) in raw {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeights(format!("{kind} weight {w} must be finite and non-negative")));
            }
            if weights.insert(kind, w).is_some() {
                return Err(Error::InvalidWeights(format!("{kind} weighted twice")));
            }
        }
        let total: f64 = weights.values().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidWeights("at least one weight must be positive".into()));
        }
        for w in weights.values_mut() {
            *w /= total;
        }
        Ok(Self { weights })
    }

    pub fn one_hot(kind: CharacteristicKind) -> Self {
        Self {
            weights: BTreeMap::from([(kind, 1.0)]),
        }
    }

    /// Parses `color=0.3,shape=0.7`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut raw = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidWeights(format!("expected kind=weight, got {part:?}")))?;
            let kind: CharacteristicKind = k.parse()?;
            let w: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidWeights(format!("bad weight {v:?}")))?;
            raw.push((kind, w));
        }
        Self::new(raw)
    }

    pub fn get(&self, kind: CharacteristicKind) -> f64 {
        self.weights.get(&kind).copied().unwrap_or(0.0)
    }

    /// Kinds with a positive weight, in canonical order.
    pub fn positive(&self) -> impl Iterator<Item = (CharacteristicKind, f64)> + '_ {
        self.weights
            .iter()
            .filter(|(_, w)| **w > 0.0)
            .map(|(k, w)| (*k, *w))
    }

    pub fn as_map(&self) -> &BTreeMap<CharacteristicKind, f64> {
        &self.weights
    }
}

impl fmt::Display for QueryWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .weights
            .iter()
            .map(|(k, w)| format!("{k}={w}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for QueryWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Weighted dissimilarity between two fused features. Kinds with zero
/// weight are skipped and may be absent.
pub fn weighted_distance(a: &FusedFeature, b: &FusedFeature, w: &QueryWeights) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (kind, wc) in w.positive() {
        let x = a.get(kind).ok_or(Error::MissingBlock(kind))?;
        let y = b.get(kind).ok_or(Error::MissingBlock(kind))?;
        if x.dim() != y.dim() {
            return Err(Error::BlockDimension {
                kind,
                expected: x.dim(),
                actual: y.dim(),
            });
        }
        num += wc * euclidean(&x.values, &y.values);
        den += wc;
    }
    Ok(num / den)
}
