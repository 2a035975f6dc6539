//! CART classification trees with Gini impurity, bagged into a forest.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Features examined per split; `None` means `floor(sqrt(dim))`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: super::DEFAULT_TREES,
            max_features: None,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
            seed: super::DEFAULT_SEED,
        }
    }
}

impl ForestParams {
    pub fn features_per_split(&self, dim: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (dim as f64).sqrt() as usize)
            .clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Class distribution of the training samples that reached the leaf.
    Leaf(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub(crate) nodes: Vec<Node>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Best Gini split of `samples` on one feature, scored by the summed
/// child impurity weighted by child size.
fn best_split_on(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    samples: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<Split> {
    let mut order: Vec<usize> = samples.to_vec();
    order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
    let total = order.len();
    let mut right = vec![0usize; n_classes];
    for &s in &order {
        right[y[s]] += 1;
    }
    let mut left = vec![0usize; n_classes];
    let mut best: Option<Split> = None;
    for i in 0..total - 1 {
        let s = order[i];
        left[y[s]] += 1;
        right[y[s]] -= 1;
        let (lo, hi) = (x[s][feature], x[order[i + 1]][feature]);
        let n_left = i + 1;
        if lo == hi || n_left < min_leaf || total - n_left < min_leaf {
            continue;
        }
        let score = n_left as f64 * gini(&left, n_left)
            + (total - n_left) as f64 * gini(&right, total - n_left);
        if best.as_ref().map_or(true, |b| score < b.score) {
            let mid = lo + (hi - lo) / 2.0;
            let threshold = if mid < hi { mid } else { lo };
            best = Some(Split { feature, threshold, score });
        }
    }
    best
}

impl DecisionTree {
    /// Grows a tree on `samples` (indices into `x`, repeats allowed).
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        n_classes: usize,
        samples: Vec<usize>,
        params: &ForestParams,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let dim = x.first().map_or(0, Vec::len);
        let mtry = params.features_per_split(dim);
        let mut nodes = Vec::new();
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        nodes.push(Node::Leaf(Vec::new()));
        let mut features: Vec<usize> = (0..dim).collect();

        while let Some((slot, samples, depth)) = stack.pop() {
            let mut counts = vec![0usize; n_classes];
            for &s in &samples {
                counts[y[s]] += 1;
            }
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
            let split = if pure || depth_capped || samples.len() < 2 * params.min_samples_leaf {
                None
            } else {
                // Draw features in random order; the first `mtry` are the
                // candidates, and later ones are only tried while no valid
                // split has been found.
                features.shuffle(rng);
                let mut best: Option<Split> = None;
                for (tried, &f) in features.iter().enumerate() {
                    if tried >= mtry && best.is_some() {
                        break;
                    }
                    if let Some(s) = best_split_on(x, y, n_classes, &samples, f, params.min_samples_leaf) {
                        if best.as_ref().map_or(true, |b| s.score < b.score) {
                            best = Some(s);
                        }
                    }
                }
                best
            };

            match split {
                None => {
                    let n = samples.len().max(1) as f64;
                    nodes[slot] = Node::Leaf(counts.iter().map(|&c| c as f64 / n).collect());
                }
                Some(s) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        samples.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf(Vec::new()));
                    nodes.push(Node::Leaf(Vec::new()));
                    nodes[slot] = Node::Split {
                        feature: s.feature as u32,
                        threshold: s.threshold,
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    stack.push((left + 1, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        Self { nodes }
    }

    /// Class distribution of the leaf `row` falls into.
    pub fn predict_proba(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(dist) => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(self.predict_proba(row))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Index of the largest entry, the lowest index on ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub(crate) params: ForestParams,
    pub(crate) n_classes: usize,
    pub(crate) dim: usize,
    pub(crate) trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Trains `params.trees` trees. Tree `i` draws from a ChaCha stream
    /// keyed by the seed and `i`, so results do not depend on scheduling.
    pub fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: ForestParams) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if params.trees == 0 || params.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("forest needs trees >= 1 and min_samples_leaf >= 1".into()));
        }
        let dim = x[0].len();
        if x.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: format!("{dim} features per row"),
                actual: "ragged rows".into(),
            });
        }
        if x.len() != y.len() || y.iter().any(|&c| c >= n_classes) {
            return Err(Error::InvalidConfig("labels must match rows and lie below n_classes".into()));
        }
        let n = x.len();
        let trees = (0..params.trees as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(i);
                let samples = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(x, y, n_classes, samples, &params, &mut rng)
            })
            .collect();
        Ok(Self {
            params,
            n_classes,
            dim,
            trees,
        })
    }

    /// Mean of the trees' leaf distributions.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim.to_string(),
                actual: row.len().to_string(),
            });
        }
        let mut acc = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.predict_proba(row)) {
                *a += p;
            }
        }
        let n = self.trees.len() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        self.predict_proba(row).map(|p| argmax(&p))
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}
