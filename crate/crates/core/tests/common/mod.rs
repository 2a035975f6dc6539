//! Independent reference implementations shared by the property and
//! acceptance suites.
#![allow(dead_code)]

use logofuse_core::features::{FeatureBlock, FusedFeature, QueryWeights};
use logofuse_core::CharacteristicKind;
use rand::Rng;

/// LRAP straight from the definition: for each true label, the share of
/// labels scored at least as high that are true. `None` when no sample has
/// a true label.
pub fn lrap_oracle(y: &[Vec<bool>], f: &[Vec<f64>]) -> Option<f64> {
    let mut total = 0.0;
    let mut evaluated = 0;
    for (yi, fi) in y.iter().zip(f) {
        let n_true = yi.iter().filter(|t| **t).count();
        if n_true == 0 {
            continue;
        }
        let mut sample = 0.0;
        for j in 0..yi.len() {
            if !yi[j] {
                continue;
            }
            let rank = (0..yi.len()).filter(|&k| fi[k] >= fi[j]).count();
            let l = (0..yi.len()).filter(|&k| yi[k] && fi[k] >= fi[j]).count();
            sample += l as f64 / rank as f64;
        }
        total += sample / n_true as f64;
        evaluated += 1;
    }
    (evaluated > 0).then(|| total / evaluated as f64)
}

/// Ranking loss from the definition: misordered (true, false) pairs with
/// `f_true <= f_false`, per sample, over samples with both kinds.
pub fn lrl_oracle(y: &[Vec<bool>], f: &[Vec<f64>]) -> Option<f64> {
    let mut total = 0.0;
    let mut evaluated = 0;
    for (yi, fi) in y.iter().zip(f) {
        let n_true = yi.iter().filter(|t| **t).count();
        let n_false = yi.len() - n_true;
        if n_true == 0 || n_false == 0 {
            continue;
        }
        let mut bad = 0;
        for k in 0..yi.len() {
            for l in 0..yi.len() {
                if yi[k] && !yi[l] && fi[k] <= fi[l] {
                    bad += 1;
                }
            }
        }
        total += bad as f64 / (n_true * n_false) as f64;
        evaluated += 1;
    }
    (evaluated > 0).then(|| total / evaluated as f64)
}

/// Random instance with deliberate score ties.
pub fn random_instance(rng: &mut impl Rng, max_n: usize, max_l: usize) -> (Vec<Vec<bool>>, Vec<Vec<f64>>) {
    let n = rng.gen_range(1..=max_n);
    let l = rng.gen_range(1..=max_l);
    let coarse = rng.gen_bool(0.5);
    let y = (0..n).map(|_| (0..l).map(|_| rng.gen_bool(0.4)).collect()).collect();
    let f = (0..n)
        .map(|_| {
            (0..l)
                .map(|_| if coarse { rng.gen_range(0..4) as f64 / 4.0 } else { rng.gen::<f64>() })
                .collect()
        })
        .collect();
    (y, f)
}

/// Plain Euclidean distance, written independently of the crate.
pub fn reference_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + (x - y) * (x - y)).sqrt()
}

pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub const KINDS: [(CharacteristicKind, usize); 3] = [
    (CharacteristicKind::Color, 5),
    (CharacteristicKind::Shape, 4),
    (CharacteristicKind::Generic, 3),
];

pub fn random_feature(rng: &mut impl Rng) -> FusedFeature {
    FusedFeature::from_blocks(KINDS.iter().map(|&(k, d)| FeatureBlock::new(k, unit_vector(rng, d)))).unwrap()
}

/// The preset weightings plus one random one.
pub fn weight_presets(rng: &mut impl Rng) -> Vec<QueryWeights> {
    use CharacteristicKind::*;
    vec![
        QueryWeights::one_hot(Color),
        QueryWeights::one_hot(Shape),
        QueryWeights::one_hot(Generic),
        QueryWeights::new([(Color, 0.3), (Shape, 0.7)]).unwrap(),
        QueryWeights::new([(Color, 0.7), (Shape, 0.3)]).unwrap(),
        QueryWeights::new(KINDS.iter().map(|&(k, _)| (k, rng.gen_range(0.0..1.0)))).unwrap(),
    ]
}
