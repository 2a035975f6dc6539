//! Exact weighted kNN over fused features, kNN and BRkNN label scoring, and
//! LabelPowerset over a random forest.

mod eval;
mod forest;
mod index;
mod knn;
mod powerset;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::QueryWeights;
use crate::taxonomy::CharacteristicKind;

pub use eval::{evaluate_nar, label_matrices, precision_at_k, NarReport};
pub use forest::{DecisionTree, ForestParams, RandomForest};
pub use index::{build_index, Annotations, IndexSchema, SearchIndex};
pub use knn::{
    brknn_classify, brknn_from_neighbors, knn_label_scores, query_knn, query_knn_excluding,
    vote_fraction, Hit, RankedResult,
};
pub use powerset::{labelpowerset_predict, labelpowerset_train, LabelPowerset, PowersetConfig};

pub const DEFAULT_K: usize = 9;
pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Retrieval and classifier settings. Distance ties always break by
/// ascending logo id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub k: usize,
    pub trees: usize,
    pub weights: QueryWeights,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(weights: QueryWeights) -> Self {
        Self {
            k: DEFAULT_K,
            trees: DEFAULT_TREES,
            weights,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_trees(mut self, trees: usize) -> Self {
        self.trees = trees;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.trees == 0 {
            return Err(Error::InvalidConfig("the forest needs at least one tree".into()));
        }
        Ok(())
    }
}

/// Per-label confidences over a kind's full label space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelScores {
    pub kind: CharacteristicKind,
    pub scores: Vec<f64>,
}

impl LabelScores {
    pub fn get(&self, label: u32) -> f64 {
        self.scores.get(label as usize).copied().unwrap_or(0.0)
    }

    /// Labels scoring at least `floor`, by descending score then label id.
    pub fn ranked(&self, floor: f64) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = self
            .scores
            .iter()
            .enumerate()
            .filter(|(_, s)| **s >= floor)
            .map(|(i, s)| (i as u32, *s))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    /// Labels whose score reaches `threshold`.
    pub fn decide(&self, threshold: f64) -> BTreeSet<u32> {
        self.ranked(threshold).into_iter().map(|(l, _)| l).collect()
    }
}

fn labeled_kind(kind: CharacteristicKind) -> Result<usize> {
    let n = crate::taxonomy::Taxonomy::embedded().label_count(kind);
    if n == 0 {
        return Err(Error::InvalidConfig(format!("{kind} has no label space")));
    }
    Ok(n)
}
