use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use super::{labeled_kind, LabelScores, SearchConfig, SearchIndex};
use crate::error::{Error, Result};
use crate::features::{euclidean, FusedFeature};
use crate::taxonomy::CharacteristicKind;

/// Records scanned per parallel task.
const SCAN_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hit {
    pub id: u64,
    pub distance: f64,
}

/// Nearest records by ascending distance, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub hits: Vec<Hit>,
    /// Candidates beyond the first `k` were cut off.
    pub truncated: bool,
    /// `k` exceeded the number of candidates, so every one is returned.
    pub k_exceeds_index: bool,
}

impl RankedResult {
    pub fn ids(&self) -> Vec<u64> {
        self.hits.iter().map(|h| h.id).collect()
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    distance: f64,
    id: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

/// Query blocks paired with their weights, in canonical kind order.
fn weighted_terms<'q>(
    index: &SearchIndex,
    query: &'q FusedFeature,
    cfg: &SearchConfig,
) -> Result<Vec<(CharacteristicKind, f64, &'q [f64])>> {
    cfg.validate()?;
    cfg.weights
        .positive()
        .map(|(kind, w)| {
            let dim = *index
                .schema()
                .dims
                .get(&kind)
                .ok_or_else(|| Error::Schema(format!("index holds no {kind} blocks")))?;
            let block = query.get(kind).ok_or(Error::MissingBlock(kind))?;
            if block.dim() != dim {
                return Err(Error::BlockDimension {
                    kind,
                    expected: dim,
                    actual: block.dim(),
                });
            }
            Ok((kind, w, block.values.as_slice()))
        })
        .collect()
}

/// Exact top-`k` by weighted distance over a full scan.
pub fn query_knn(index: &SearchIndex, query: &FusedFeature, cfg: &SearchConfig) -> Result<RankedResult> {
    query_knn_excluding(index, query, cfg, None)
}

/// As [`query_knn`], leaving one stored logo out (leave-one-out queries).
pub fn query_knn_excluding(
    index: &SearchIndex,
    query: &FusedFeature,
    cfg: &SearchConfig,
    exclude: Option<u64>,
) -> Result<RankedResult> {
    let terms = weighted_terms(index, query, cfg)?;
    let skip = exclude.and_then(|id| index.position(id));
    let k = cfg.k;
    let n = index.len();

    let chunks: Vec<Vec<Candidate>> = (0..n.div_ceil(SCAN_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut heap = BinaryHeap::with_capacity(k + 1);
            for pos in c * SCAN_CHUNK..((c + 1) * SCAN_CHUNK).min(n) {
                if Some(pos) == skip {
                    continue;
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for &(kind, w, q) in &terms {
                    num += w * euclidean(q, index.block_at(kind, pos).expect("kind in schema"));
                    den += w;
                }
                let cand = Candidate {
                    distance: num / den,
                    id: index.id_at(pos),
                };
                if heap.len() < k {
                    heap.push(cand);
                } else if cand < *heap.peek().expect("k >= 1") {
                    heap.pop();
                    heap.push(cand);
                }
            }
            heap.into_vec()
        })
        .collect();

    let mut merged: Vec<Candidate> = chunks.into_iter().flatten().collect();
    merged.sort_unstable();
    merged.truncate(k);
    let candidates = n - usize::from(skip.is_some());
    Ok(RankedResult {
        hits: merged
            .into_iter()
            .map(|c| Hit {
                id: c.id,
                distance: c.distance,
            })
            .collect(),
        truncated: k < candidates,
        k_exceeds_index: k > candidates,
    })
}

/// Share of the neighbors annotated with each label. The denominator is the
/// number of neighbors returned, which is `k` unless the index is smaller.
pub fn vote_fraction(index: &SearchIndex, neighbors: &RankedResult, kind: CharacteristicKind) -> Result<LabelScores> {
    let n_labels = labeled_kind(kind)?;
    let mut votes = vec![0usize; n_labels];
    for hit in &neighbors.hits {
        let pos = index.position(hit.id).ok_or(Error::UnknownId(hit.id))?;
        if let Some(labels) = index.annotations_at(pos).get(&kind) {
            for &l in labels {
                votes[l as usize] += 1;
            }
        }
    }
    let k = neighbors.hits.len().max(1) as f64;
    Ok(LabelScores {
        kind,
        scores: votes.into_iter().map(|v| v as f64 / k).collect(),
    })
}

pub fn knn_label_scores(
    index: &SearchIndex,
    query: &FusedFeature,
    cfg: &SearchConfig,
    kind: CharacteristicKind,
) -> Result<LabelScores> {
    vote_fraction(index, &query_knn(index, query, cfg)?, kind)
}

/// Binary relevance: one independent one-against-all kNN classifier per
/// label over the shared neighbor set. Each confidence is the share of
/// neighbors on the positive side of that label's binary problem.
pub fn brknn_from_neighbors(
    index: &SearchIndex,
    neighbors: &RankedResult,
    kind: CharacteristicKind,
) -> Result<LabelScores> {
    let n_labels = labeled_kind(kind)?;
    let positions = neighbors
        .hits
        .iter()
        .map(|h| index.position(h.id).ok_or(Error::UnknownId(h.id)))
        .collect::<Result<Vec<_>>>()?;
    let k = positions.len().max(1) as f64;
    let scores = (0..n_labels as u32)
        .map(|label| {
            let positive = positions
                .iter()
                .filter(|&&p| index.annotations_at(p).get(&kind).is_some_and(|s| s.contains(&label)))
                .count();
            positive as f64 / k
        })
        .collect();
    Ok(LabelScores { kind, scores })
}

pub fn brknn_classify(
    index: &SearchIndex,
    query: &FusedFeature,
    cfg: &SearchConfig,
    kind: CharacteristicKind,
) -> Result<LabelScores> {
    brknn_from_neighbors(index, &query_knn(index, query, cfg)?, kind)
}
