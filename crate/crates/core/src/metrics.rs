//! Label-ranking metrics (LRAP, ranking loss), the normalized average rank
//! used for retrieval, and plain binary accuracy.
//!
//! Ties follow the `>=` comparisons literally: in LRAP every label scored
//! at least as high as a true label counts towards its rank, and in the
//! ranking loss a true label tied with a false one counts as misordered.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Binary ground truth `y` in `{0,1}^{N x L}`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMatrix {
    n_samples: usize,
    n_labels: usize,
    data: Vec<bool>,
}

impl GroundTruthMatrix {
    pub fn new(n_samples: usize, n_labels: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != n_samples * n_labels {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {n_samples}x{n_labels} matrix",
                data.len()
            )));
        }
        Ok(Self {
            n_samples,
            n_labels,
            data,
        })
    }

    /// Rows of 0/1 integers; any other value is rejected.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n_labels = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_labels);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_labels {
                return Err(Error::InvalidMatrix("ragged ground truth rows".into()));
            }
            for &v in row {
                match v {
                    0 => data.push(false),
                    1 => data.push(true),
                    other => {
                        return Err(Error::InvalidMatrix(format!("ground truth entry {other} is not binary")))
                    }
                }
            }
        }
        Self::new(rows.len(), n_labels, data)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_samples, self.n_labels)
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.data[i * self.n_labels..(i + 1) * self.n_labels]
    }
}

/// Real-valued label scores, same shape as the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_samples: usize,
    n_labels: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(n_samples: usize, n_labels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_samples * n_labels {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {n_samples}x{n_labels} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("score {bad} is not finite")));
        }
        Ok(Self {
            n_samples,
            n_labels,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_labels = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != n_labels) {
            return Err(Error::InvalidMatrix("ragged score rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), n_labels, data)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_samples, self.n_labels)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_labels..(i + 1) * self.n_labels]
    }
}

/// A metric value together with how many samples fed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankingReport {
    pub value: f64,
    pub evaluated: usize,
    /// Degenerate samples left out (no true labels, or for the ranking
    /// loss, every label true).
    pub skipped: usize,
}

fn check_shapes(y: &GroundTruthMatrix, f: &ScoreMatrix) -> Result<()> {
    if y.shape() != f.shape() {
        return Err(Error::ShapeMismatch {
            truth: y.shape(),
            scores: f.shape(),
        });
    }
    Ok(())
}

/// Count of entries in an ascending slice that are `>= x`.
fn count_at_least(sorted: &[f64], x: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v < x)
}

fn sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

fn lrap_sample(truth: &[bool], scores: &[f64]) -> Option<f64> {
    let all = sorted(scores.iter().copied());
    let relevant = sorted(truth.iter().zip(scores).filter(|(t, _)| **t).map(|(_, s)| *s));
    if relevant.is_empty() {
        return None;
    }
    let total: f64 = relevant
        .iter()
        .map(|&s| count_at_least(&relevant, s) as f64 / count_at_least(&all, s) as f64)
        .sum();
    Some(total / relevant.len() as f64)
}

fn lrl_sample(truth: &[bool], scores: &[f64]) -> Option<f64> {
    let relevant: Vec<f64> = truth.iter().zip(scores).filter(|(t, _)| **t).map(|(_, s)| *s).collect();
    let irrelevant = sorted(truth.iter().zip(scores).filter(|(t, _)| !**t).map(|(_, s)| *s));
    if relevant.is_empty() || irrelevant.is_empty() {
        return None;
    }
    let misordered: usize = relevant.iter().map(|&s| count_at_least(&irrelevant, s)).sum();
    Some(misordered as f64 / (relevant.len() * irrelevant.len()) as f64)
}

fn average(
    y: &GroundTruthMatrix,
    f: &ScoreMatrix,
    metric: &'static str,
    per_sample: fn(&[bool], &[f64]) -> Option<f64>,
) -> Result<RankingReport> {
    check_shapes(y, f)?;
    let values: Vec<Option<f64>> = (0..y.n_samples)
        .into_par_iter()
        .map(|i| per_sample(y.row(i), f.row(i)))
        .collect();
    let mut sum = 0.0;
    let mut evaluated = 0;
    for v in values.iter().flatten() {
        sum += v;
        evaluated += 1;
    }
    let skipped = values.len() - evaluated;
    if evaluated == 0 {
        return Err(Error::NoEvaluableSamples(metric));
    }
    if skipped > 0 {
        warn!("{metric}: skipped {skipped} degenerate samples of {}", values.len());
    }
    Ok(RankingReport {
        value: sum / evaluated as f64,
        evaluated,
        skipped,
    })
}

pub fn lrap_report(y: &GroundTruthMatrix, f: &ScoreMatrix) -> Result<RankingReport> {
    average(y, f, "LRAP needs a sample with a true label", lrap_sample)
}

/// Label ranking average precision in `(0, 1]`; samples without any true
/// label are skipped.
pub fn lrap(y: &GroundTruthMatrix, f: &ScoreMatrix) -> Result<f64> {
    lrap_report(y, f).map(|r| r.value)
}

pub fn lrl_report(y: &GroundTruthMatrix, f: &ScoreMatrix) -> Result<RankingReport> {
    average(
        y,
        f,
        "ranking loss needs a sample with both true and false labels",
        lrl_sample,
    )
}

/// Label ranking loss in `[0, 1]`; samples whose labels are all true or
/// all false are skipped.
pub fn lrl(y: &GroundTruthMatrix, f: &ScoreMatrix) -> Result<f64> {
    lrl_report(y, f).map(|r| r.value)
}

/// 1-based ranks of the relevant items within a ranking of `corpus_size`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankEvaluation {
    corpus_size: usize,
    ranks: Vec<usize>,
}

impl RankEvaluation {
    pub fn new(corpus_size: usize, ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::InvalidRanks("no relevant items".into()));
        }
        let mut sorted = ranks.clone();
        sorted.sort_unstable();
        if sorted[0] == 0 || *sorted.last().unwrap() > corpus_size {
            return Err(Error::InvalidRanks(format!(
                "ranks must lie in [1, {corpus_size}]"
            )));
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidRanks("ranks must be distinct".into()));
        }
        Ok(Self { corpus_size, ranks })
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn relevant(&self) -> usize {
        self.ranks.len()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }
}

/// Normalized average rank,
/// `(sum R_i - N_rel (N_rel + 1) / 2) / (N * N_rel)`: 0 when the relevant
/// items come first, about 0.5 for a random order.
pub fn nar(eval: &RankEvaluation) -> f64 {
    let n = eval.corpus_size as u128;
    let n_rel = eval.ranks.len() as u128;
    let sum: u128 = eval.ranks.iter().map(|&r| r as u128).sum();
    let excess = sum - n_rel * (n_rel + 1) / 2;
    excess as f64 / (n * n_rel) as f64
}

/// Fraction of positions where the prediction equals the truth.
pub fn binary_accuracy(pred: &[bool], truth: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::InvalidMatrix(format!(
            "accuracy over {} predictions and {} truths",
            pred.len(),
            truth.len()
        )));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(y: &[u8], f: &[f64]) -> (GroundTruthMatrix, ScoreMatrix) {
        (
            GroundTruthMatrix::from_rows(&[y]).unwrap(),
            ScoreMatrix::from_rows(&[f]).unwrap(),
        )
    }

    #[test]
    fn lrap_top_ranked_single_label() {
        let (y, f) = single(&[1, 0, 0], &[0.9, 0.5, 0.1]);
        assert_eq!(lrap(&y, &f).unwrap(), 1.0);
    }

    #[test]
    fn lrap_two_true_labels() {
        // label 0: 1 true among the 2 scored >= 0.5; label 2: 2 of 3.
        let (y, f) = single(&[1, 0, 1], &[0.5, 0.9, 0.1]);
        assert!((lrap(&y, &f).unwrap() - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn lrap_ties_inflate_rank() {
        let (y, f) = single(&[1, 0], &[0.5, 0.5]);
        assert_eq!(lrap(&y, &f).unwrap(), 0.5);
    }

    #[test]
    fn lrap_with_one_label_is_reciprocal_rank() {
        let y = GroundTruthMatrix::from_rows(&[[0u8, 1, 0, 0], [0, 0, 0, 1], [1, 0, 0, 0]]).unwrap();
        let f = ScoreMatrix::from_rows(&[
            [0.4, 0.3, 0.2, 0.1],
            [0.4, 0.3, 0.2, 0.1],
            [0.4, 0.3, 0.2, 0.1],
        ])
        .unwrap();
        let mrr = (1.0 / 2.0 + 1.0 / 4.0 + 1.0) / 3.0;
        assert!((lrap(&y, &f).unwrap() - mrr).abs() < 1e-15);
    }

    #[test]
    fn lrl_examples() {
        let (y, f) = single(&[1, 0, 1], &[0.5, 0.9, 0.1]);
        assert_eq!(lrl(&y, &f).unwrap(), 1.0);
        let (y, f) = single(&[1, 1, 0, 0], &[0.9, 0.8, 0.2, 0.1]);
        assert_eq!(lrl(&y, &f).unwrap(), 0.0);
        let (y, f) = single(&[1, 0], &[0.3, 0.3]);
        assert_eq!(lrl(&y, &f).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_samples_are_skipped() {
        let y = GroundTruthMatrix::from_rows(&[[0u8, 0], [1, 0], [1, 1]]).unwrap();
        let f = ScoreMatrix::from_rows(&[[0.1, 0.2], [0.9, 0.1], [0.5, 0.5]]).unwrap();
        let r = lrap_report(&y, &f).unwrap();
        assert_eq!((r.evaluated, r.skipped), (2, 1));
        let r = lrl_report(&y, &f).unwrap();
        assert_eq!((r.evaluated, r.skipped, r.value), (1, 2, 0.0));
    }

    #[test]
    fn errors() {
        let (y, _) = single(&[0, 0], &[0.1, 0.2]);
        let f = ScoreMatrix::from_rows(&[[0.1, 0.2]]).unwrap();
        assert!(matches!(lrap(&y, &f), Err(Error::NoEvaluableSamples(_))));
        assert!(matches!(lrl(&y, &f), Err(Error::NoEvaluableSamples(_))));
        let f3 = ScoreMatrix::from_rows(&[[0.1, 0.2, 0.3]]).unwrap();
        assert!(matches!(lrap(&y, &f3), Err(Error::ShapeMismatch { .. })));
        assert!(GroundTruthMatrix::from_rows(&[[2u8]]).is_err());
        assert!(ScoreMatrix::from_rows(&[[f64::NAN]]).is_err());
    }

    #[test]
    fn nar_closed_forms() {
        let perfect = RankEvaluation::new(100, (1..=10).collect()).unwrap();
        assert_eq!(nar(&perfect), 0.0);
        let bottom = RankEvaluation::new(100, (91..=100).collect()).unwrap();
        assert_eq!(nar(&bottom), 90.0 / 100.0);
    }

    #[test]
    fn nar_rejects_bad_ranks() {
        assert!(RankEvaluation::new(10, vec![]).is_err());
        assert!(RankEvaluation::new(10, vec![0]).is_err());
        assert!(RankEvaluation::new(10, vec![11]).is_err());
        assert!(RankEvaluation::new(10, vec![3, 3]).is_err());
    }

    #[test]
    fn accuracy() {
        let t = [true, false, true, false];
        assert_eq!(binary_accuracy(&t, &t).unwrap(), 1.0);
        let c: Vec<bool> = t.iter().map(|b| !b).collect();
        assert_eq!(binary_accuracy(&c, &t).unwrap(), 0.0);
        assert_eq!(binary_accuracy(&[true, false, true, true], &t).unwrap(), 0.75);
        assert!(binary_accuracy(&[true], &t).is_err());
        assert!(binary_accuracy(&[], &[]).is_err());
    }
}
