mod common;

use std::collections::{BTreeMap, BTreeSet};

use logofuse_core::features::{weighted_distance, FusedFeature, QueryWeights};
use logofuse_core::metrics::{lrap, lrl, GroundTruthMatrix, ScoreMatrix};
use logofuse_core::mlsearch::{
    brknn_classify, build_index, knn_label_scores, query_knn, Annotations, IndexSchema, SearchConfig,
    SearchIndex,
};
use logofuse_core::CharacteristicKind;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn matrices(y: &[Vec<bool>], f: &[Vec<f64>]) -> (GroundTruthMatrix, ScoreMatrix) {
    let l = y[0].len();
    (
        GroundTruthMatrix::new(y.len(), l, y.concat()).unwrap(),
        ScoreMatrix::new(f.len(), l, f.concat()).unwrap(),
    )
}

fn instance() -> impl Strategy<Value = (Vec<Vec<bool>>, Vec<Vec<f64>>)> {
    any::<u64>().prop_map(|seed| random_instance(&mut ChaCha8Rng::seed_from_u64(seed), 8, 6))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn metrics_match_oracles_and_ranges((y, f) in instance()) {
        let (ym, fm) = matrices(&y, &f);
        match lrap_oracle(&y, &f) {
            Some(want) => {
                let got = lrap(&ym, &fm).unwrap();
                prop_assert!((got - want).abs() <= 1e-12);
                prop_assert!(got > 0.0 && got <= 1.0);
            }
            None => prop_assert!(lrap(&ym, &fm).is_err()),
        }
        match lrl_oracle(&y, &f) {
            Some(want) => {
                let got = lrl(&ym, &fm).unwrap();
                prop_assert!((got - want).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&got));
            }
            None => prop_assert!(lrl(&ym, &fm).is_err()),
        }
    }

    #[test]
    fn increasing_transform_keeps_metrics((y, f) in instance()) {
        let g: Vec<Vec<f64>> = f.iter().map(|r| r.iter().map(|v| (3.0 * v).exp() - 7.0).collect()).collect();
        let (ym, fm) = matrices(&y, &f);
        let (_, gm) = matrices(&y, &g);
        if let Ok(a) = lrap(&ym, &fm) {
            prop_assert!((a - lrap(&ym, &gm).unwrap()).abs() <= 1e-12);
        }
        if let Ok(a) = lrl(&ym, &fm) {
            prop_assert!((a - lrl(&ym, &gm).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn swapping_a_correct_pair_degrades((y, f) in instance(), pick in any::<prop::sample::Index>()) {
        // Ties are ranked pessimistically, so a swap can lift a label out of a
        // tie; the property is about strictly ordered rows.
        let mut f = f;
        for (i, v) in f[0].iter_mut().enumerate() {
            *v += i as f64 * 1e-6;
        }
        let pairs: Vec<(usize, usize)> = (0..y[0].len())
            .flat_map(|a| (0..y[0].len()).map(move |b| (a, b)))
            .filter(|&(a, b)| y[0][a] && !y[0][b] && f[0][a] > f[0][b])
            .collect();
        prop_assume!(!pairs.is_empty());
        let (a, b) = pairs[pick.index(pairs.len())];
        let mut g = f.clone();
        g[0].swap(a, b);
        let (ym, fm) = matrices(&y, &f);
        let (_, gm) = matrices(&y, &g);
        prop_assert!(lrap(&ym, &gm).unwrap() <= lrap(&ym, &fm).unwrap() + 1e-12);
        prop_assert!(lrl(&ym, &gm).unwrap() >= lrl(&ym, &fm).unwrap() - 1e-12);
    }
}

fn random_index(rng: &mut ChaCha8Rng, n: usize) -> SearchIndex {
    let mut features: Vec<FusedFeature> = Vec::with_capacity(n);
    for _ in 0..n {
        // Some exact duplicates to force distance ties.
        if !features.is_empty() && rng.gen_bool(0.1) {
            let i = rng.gen_range(0..features.len());
            features.push(features[i].clone());
        } else {
            features.push(random_feature(rng));
        }
    }
    let mut ids: Vec<u64> = (0..n as u64).map(|i| i * 7 + rng.gen_range(0..7)).collect();
    ids.reverse();
    let shape_labels = 7;
    let notes: BTreeMap<u64, Annotations> = ids
        .iter()
        .map(|&id| {
            let set: BTreeSet<u32> = (0..shape_labels).filter(|_| rng.gen_bool(0.3)).collect();
            (id, Annotations::from([(CharacteristicKind::Shape, set)]))
        })
        .collect();
    let records = ids.iter().copied().zip(features).collect();
    build_index(records, notes, IndexSchema::new(KINDS)).unwrap()
}

fn naive_ranking(index: &SearchIndex, query: &FusedFeature, w: &QueryWeights) -> Vec<(u64, f64)> {
    let mut all: Vec<(u64, f64)> = index
        .ids()
        .iter()
        .map(|&id| (id, weighted_distance(query, &index.feature(id).unwrap(), w).unwrap()))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_full_sort(seed in any::<u64>(), n in 1usize..200, k in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = random_index(&mut rng, n);
        let query = random_feature(&mut rng);
        for w in weight_presets(&mut rng) {
            let got = query_knn(&index, &query, &SearchConfig::new(w.clone()).with_k(k)).unwrap();
            let want: Vec<(u64, f64)> = naive_ranking(&index, &query, &w).into_iter().take(k).collect();
            let got: Vec<(u64, f64)> = got.hits.iter().map(|h| (h.id, h.distance)).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn top_k_is_prefix_of_top_k_plus_one(seed in any::<u64>(), k in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = random_index(&mut rng, 80);
        let query = random_feature(&mut rng);
        let w = weight_presets(&mut rng).pop().unwrap();
        let a = query_knn(&index, &query, &SearchConfig::new(w.clone()).with_k(k)).unwrap();
        let b = query_knn(&index, &query, &SearchConfig::new(w).with_k(k + 1)).unwrap();
        prop_assert_eq!(&a.hits[..], &b.hits[..a.hits.len()]);
    }

    #[test]
    fn scaling_raw_weights_keeps_ranking(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        use CharacteristicKind::*;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = random_index(&mut rng, 120);
        let query = random_feature(&mut rng);
        let raw: Vec<(CharacteristicKind, f64)> =
            [Color, Shape, Generic].iter().map(|&k| (k, rng.gen_range(0.01..1.0))).collect();
        let scaled: Vec<_> = raw.iter().map(|&(k, w)| (k, w * scale)).collect();
        let a = query_knn(&index, &query, &SearchConfig::new(QueryWeights::new(raw).unwrap()).with_k(120)).unwrap();
        let b = query_knn(&index, &query, &SearchConfig::new(QueryWeights::new(scaled).unwrap()).with_k(120)).unwrap();
        prop_assert_eq!(a.ids(), b.ids());
    }

    #[test]
    fn brknn_equals_knn_votes(seed in any::<u64>(), k in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = random_index(&mut rng, 60);
        let query = random_feature(&mut rng);
        let cfg = SearchConfig::new(weight_presets(&mut rng).pop().unwrap()).with_k(k);
        let knn = knn_label_scores(&index, &query, &cfg, CharacteristicKind::Shape).unwrap();
        let br = brknn_classify(&index, &query, &cfg, CharacteristicKind::Shape).unwrap();
        prop_assert_eq!(knn, br);
    }

    #[test]
    fn weighted_distance_is_a_metric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (random_feature(&mut rng), random_feature(&mut rng), random_feature(&mut rng));
        for w in weight_presets(&mut rng) {
            let d = |x: &FusedFeature, y: &FusedFeature| weighted_distance(x, y, &w).unwrap();
            prop_assert_eq!(d(&a, &a), 0.0);
            prop_assert!(d(&a, &b) >= 0.0);
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
            prop_assert!(d(&a, &b) <= 2.0 + 1e-12);
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let index = random_index(&mut rng, 700);
    let query = random_feature(&mut rng);
    let cfg = SearchConfig::new(QueryWeights::parse("color=0.3,shape=0.7").unwrap()).with_k(50);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| query_knn(&index, &query, &cfg).unwrap())
    };
    let one = run(1);
    for threads in [2, 3, 8] {
        assert_eq!(run(threads), one);
    }
}
