use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use super::{query_knn_excluding, LabelScores, RankedResult, SearchConfig, SearchIndex};
use crate::error::{Error, Result};
use crate::metrics::{nar, GroundTruthMatrix, RankEvaluation, ScoreMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NarReport {
    pub mean: f64,
    /// NAR of each query, in group order.
    pub per_query: Vec<(u64, f64)>,
}

/// Every member of a group queries the rest of the index with itself left
/// out; the other members of its group are the relevant items, so each
/// query has `N = |index| - 1` candidates and `N_rel = |group| - 1`.
pub fn evaluate_nar(index: &SearchIndex, groups: &[Vec<u64>], cfg: &SearchConfig) -> Result<NarReport> {
    let mut queries = Vec::new();
    for group in groups {
        if group.len() < 2 {
            return Err(Error::InvalidConfig("a group needs at least two members".into()));
        }
        for &q in group {
            let feature = index.feature(q).ok_or(Error::UnknownId(q))?;
            queries.push((q, feature, group));
        }
    }
    if queries.is_empty() {
        return Err(Error::InvalidConfig("no groups to evaluate".into()));
    }
    let full = cfg.clone().with_k(index.len().max(1));
    let per_query = queries
        .par_iter()
        .map(|(q, feature, group)| {
            let ranking = query_knn_excluding(index, feature, &full, Some(*q))?;
            let rank_of: HashMap<u64, usize> = ranking.hits.iter().enumerate().map(|(i, h)| (h.id, i + 1)).collect();
            let ranks = group.iter().filter(|&&m| m != *q).map(|m| rank_of[m]).collect();
            Ok((*q, nar(&RankEvaluation::new(ranking.hits.len(), ranks)?)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = per_query.iter().map(|(_, v)| v).sum::<f64>() / per_query.len() as f64;
    Ok(NarReport { mean, per_query })
}

/// Share of the first `k` hits that are relevant.
pub fn precision_at_k(result: &RankedResult, k: usize, relevant: impl Fn(u64) -> bool) -> f64 {
    let top = &result.hits[..k.min(result.hits.len())];
    if top.is_empty() {
        return 0.0;
    }
    top.iter().filter(|h| relevant(h.id)).count() as f64 / top.len() as f64
}

/// Stacks per-sample truths and scores into metric matrices.
pub fn label_matrices(truth: &[BTreeSet<u32>], scores: &[LabelScores]) -> Result<(GroundTruthMatrix, ScoreMatrix)> {
    if truth.len() != scores.len() {
        return Err(Error::ShapeMismatch {
            truth: (truth.len(), 0),
            scores: (scores.len(), 0),
        });
    }
    let n_labels = scores.first().map_or(0, |s| s.scores.len());
    let mut y = Vec::with_capacity(truth.len() * n_labels);
    let mut f = Vec::with_capacity(truth.len() * n_labels);
    for (t, s) in truth.iter().zip(scores) {
        if s.scores.len() != n_labels {
            return Err(Error::InvalidMatrix("label scores of differing kinds".into()));
        }
        if let Some(bad) = t.iter().find(|&&l| l as usize >= n_labels) {
            return Err(Error::InvalidMatrix(format!("true label {bad} outside {n_labels} labels")));
        }
        y.extend((0..n_labels as u32).map(|l| t.contains(&l)));
        f.extend_from_slice(&s.scores);
    }
    Ok((
        GroundTruthMatrix::new(truth.len(), n_labels, y)?,
        ScoreMatrix::new(scores.len(), n_labels, f)?,
    ))
}
