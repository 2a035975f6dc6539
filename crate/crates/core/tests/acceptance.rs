//! One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use logofuse_core::features::{euclidean, weighted_distance, FeatureBlock, FusedFeature, QueryWeights};
use logofuse_core::metrics::{lrap, lrl, nar, GroundTruthMatrix, RankEvaluation, ScoreMatrix};
use logofuse_core::mlsearch::{
    brknn_classify, build_index, evaluate_nar, knn_label_scores, labelpowerset_train, precision_at_k,
    query_knn, query_knn_excluding, Annotations, DecisionTree, ForestParams, IndexSchema, PowersetConfig,
    SearchConfig, SearchIndex, DEFAULT_K, DEFAULT_TREES,
};
use logofuse_core::pipeline::{extract_manifest, index_features, ExtractConfig};
use logofuse_core::preprocess::{
    crop_uniform_border, fill_text_region_with, FillMode, RasterImage, TextMask,
};
use logofuse_core::store::{generate_synthetic_corpus, SyntheticSpec};
use logofuse_core::taxonomy::{parse_code, CharacteristicKind, Taxonomy};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let (y, f) = random_instance(&mut rng, 8, 6);
        let l = y[0].len();
        let ym = GroundTruthMatrix::new(y.len(), l, y.concat()).map_err(|e| e.to_string())?;
        let fm = ScoreMatrix::new(f.len(), l, f.concat()).map_err(|e| e.to_string())?;
        for (name, got, want) in [
            ("lrap", lrap(&ym, &fm).ok(), lrap_oracle(&y, &f)),
            ("lrl", lrl(&ym, &fm).ok(), lrl_oracle(&y, &f)),
        ] {
            match (got, want) {
                (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
                (None, None) => {}
                other => return Err(format!("instance {i}: {name} {other:?}")),
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("1000 instances, max deviation {worst:e}, {:.2?}", start.elapsed()))
}

fn nar_closed_forms() -> Outcome {
    let start = Instant::now();
    let (n, n_rel) = (10_000usize, 10usize);
    let perfect = nar(&RankEvaluation::new(n, (1..=n_rel).collect()).unwrap());
    ensure(perfect == 0.0, || format!("perfect ranks gave {perfect}"))?;
    let bottom = nar(&RankEvaluation::new(n, (n - n_rel + 1..=n).collect()).unwrap());
    let want = (n - n_rel) as f64 / n as f64;
    ensure(bottom == want, || format!("bottom ranks gave {bottom}, want {want}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let trials = 1000;
    let mean = (0..trials)
        .map(|_| {
            let ranks = sample(&mut rng, n, n_rel).into_iter().map(|r| r + 1).collect();
            nar(&RankEvaluation::new(n, ranks).unwrap())
        })
        .sum::<f64>()
        / trials as f64;
    ensure((mean - 0.5).abs() <= 0.02, || format!("random mean {mean}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("perfect 0, bottom {bottom}, random mean {mean:.4}"))
}

fn weighted_distance_properties() -> Outcome {
    use CharacteristicKind::*;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let (a, b) = (random_feature(&mut rng), random_feature(&mut rng));
        for &(kind, _) in &KINDS {
            let got = weighted_distance(&a, &b, &QueryWeights::one_hot(kind)).unwrap();
            let want = reference_euclidean(&a.get(kind).unwrap().values, &b.get(kind).unwrap().values);
            ensure(got.to_bits() == want.to_bits(), || format!("one-hot {kind}: {got} vs {want}"))?;
        }
    }

    let mut records = Vec::new();
    for id in 0..300u64 {
        records.push((id, random_feature(&mut rng)));
    }
    let index = build_index(records, BTreeMap::new(), IndexSchema::new(KINDS)).unwrap();
    for trial in 0..50 {
        let query = random_feature(&mut rng);
        let raw: Vec<(CharacteristicKind, f64)> =
            [Color, Shape, Generic].iter().map(|&k| (k, rng.gen_range(0.0..10.0))).collect();
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let scaled: Vec<_> = raw.iter().map(|&(k, w)| (k, w * scale)).collect();
        let a = query_knn(&index, &query, &SearchConfig::new(QueryWeights::new(raw).unwrap()).with_k(300)).unwrap();
        let b = query_knn(&index, &query, &SearchConfig::new(QueryWeights::new(scaled).unwrap()).with_k(300))
            .unwrap();
        ensure(a.ids() == b.ids(), || format!("trial {trial}: rescaled weights changed the ranking"))?;
    }

    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let w = QueryWeights::new(KINDS.iter().map(|&(k, _)| (k, rng.gen_range(0.0..1.0)))).unwrap();
        let (a, b, c) = (random_feature(&mut rng), random_feature(&mut rng), random_feature(&mut rng));
        let d = |x: &FusedFeature, y: &FusedFeature| weighted_distance(x, y, &w).unwrap();
        ensure(d(&a, &a) == 0.0 && d(&a, &b) >= 0.0, || "identity or positivity violated".into())?;
        worst = worst.max((d(&a, &b) - d(&b, &a)).abs());
        worst = worst.max(d(&a, &c) - d(&a, &b) - d(&b, &c));
    }
    ensure(worst <= 1e-9, || format!("axiom slack {worst:e}"))?;
    Ok(format!("one-hot bitwise on 3000 pairs, 50 rescalings, 10^4 triples (slack {worst:.1e})"))
}

fn taxonomy_cardinalities() -> Outcome {
    use CharacteristicKind::*;
    let tax = Taxonomy::embedded();
    let want = [(FigurativeMain, 25), (FigurativeSub, 123), (Color, 13), (Shape, 7), (Text, 2), (Sector, 45)];
    for (kind, n) in want {
        let got = tax.label_count(kind);
        ensure(got == n, || format!("{kind}: {got} labels, want {n}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut parsed = 0;
    for _ in 0..100_000 {
        let text = match rng.gen_range(0..3) {
            0 => format!("{}", rng.gen_range(0..35)),
            1 => format!("{}.{}", rng.gen_range(0..35), rng.gen_range(0..120)),
            _ => format!("{:02}.{:02}.{:02}", rng.gen_range(0..35), rng.gen_range(0..120), rng.gen_range(0..120)),
        };
        if let Ok(code) = parse_code(&text) {
            parsed += 1;
            let first = std::panic::catch_unwind(|| tax.group_code(&code)).map_err(|_| format!("{text} panicked"))?;
            ensure(first == tax.group_code(&code), || format!("{text} grouped twice differently"))?;
        }
    }
    Ok(format!("25/123/13/7/2/45; fuzz grouped {parsed} valid of 10^5 codes"))
}

fn labeled_index(rng: &mut ChaCha8Rng, n: usize) -> SearchIndex {
    let records: Vec<(u64, FusedFeature)> = (0..n as u64).map(|id| (id, random_feature(rng))).collect();
    let notes: BTreeMap<u64, Annotations> = (0..n as u64)
        .map(|id| {
            let set: BTreeSet<u32> = (0..45).filter(|_| rng.gen_bool(0.08)).collect();
            (id, Annotations::from([(CharacteristicKind::Sector, set)]))
        })
        .collect();
    build_index(records, notes, IndexSchema::new(KINDS)).unwrap()
}

fn brknn_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for fixture in 0..100 {
        let n = rng.gen_range(1..120);
        let index = labeled_index(&mut rng, n);
        let query = random_feature(&mut rng);
        let cfg = SearchConfig::new(weight_presets(&mut rng).pop().unwrap()).with_k(rng.gen_range(1..20));
        let knn = knn_label_scores(&index, &query, &cfg, CharacteristicKind::Sector).unwrap();
        let br = brknn_classify(&index, &query, &cfg, CharacteristicKind::Sector).unwrap();
        ensure(knn == br, || format!("fixture {fixture} differs"))?;
    }
    Ok("100 fixtures elementwise identical".into())
}

fn synthetic_end_to_end() -> Outcome {
    use CharacteristicKind::*;
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SyntheticSpec::new(500, 6).with_groups(5, 10);
    let corpus = generate_synthetic_corpus(&spec, dir.path()).map_err(|e| e.to_string())?;
    let manifest = corpus.manifest.clone().unwrap();
    let features = extract_manifest(&manifest, &ExtractConfig::default()).map_err(|e| e.to_string())?;
    let index = index_features(&manifest, features, Taxonomy::embedded()).map_err(|e| e.to_string())?;

    let fused = SearchConfig::new(QueryWeights::new([(Color, 0.3), (Shape, 0.7)]).unwrap());
    let report = evaluate_nar(&index, &corpus.groups, &fused).map_err(|e| e.to_string())?;
    ensure(report.mean < 0.05, || format!("NAR {}", report.mean))?;

    let color_of: HashMap<u64, &str> = corpus.colors.iter().map(|(id, c)| (*id, c.as_str())).collect();
    let color_only = SearchConfig::new(QueryWeights::one_hot(Color)).with_k(10);
    let mut worst = 1.0f64;
    for &id in index.ids() {
        let q = index.feature(id).unwrap();
        let hits = query_knn_excluding(&index, &q, &color_only, Some(id)).map_err(|e| e.to_string())?;
        let p = precision_at_k(&hits, 10, |h| color_of[&h] == color_of[&id]);
        worst = worst.min(p);
    }
    ensure(worst == 1.0, || format!("worst color precision@10 {worst}"))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!(
        "NAR {:.4} over {} queries, min color precision@10 {worst}, {:.1?}",
        report.mean,
        report.per_query.len(),
        start.elapsed()
    ))
}

fn knn_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for corpus in 0..500 {
        let n = rng.gen_range(1..=200);
        let index = labeled_index(&mut rng, n);
        let query = if rng.gen_bool(0.2) {
            index.feature(index.ids()[0]).unwrap()
        } else {
            random_feature(&mut rng)
        };
        let k = rng.gen_range(1..=n + 5);
        for w in weight_presets(&mut rng) {
            let got = query_knn(&index, &query, &SearchConfig::new(w.clone()).with_k(k)).unwrap();
            let mut all: Vec<(u64, f64)> = index
                .ids()
                .iter()
                .map(|&id| (id, weighted_distance(&query, &index.feature(id).unwrap(), &w).unwrap()))
                .collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            all.truncate(k);
            let got: Vec<(u64, f64)> = got.hits.iter().map(|h| (h.id, h.distance)).collect();
            ensure(got == all, || format!("corpus {corpus} (N={n}, k={k}) differs under {w}"))?;
        }
    }
    Ok("500 corpora x 6 weightings identical to full sort".into())
}

fn labelpowerset_sanity() -> Outcome {
    use CharacteristicKind::*;
    let cfg = SearchConfig::new(QueryWeights::one_hot(Color));
    ensure(cfg.k == 9 && DEFAULT_K == 9, || format!("default k {}", cfg.k))?;
    ensure(cfg.trees == 100 && DEFAULT_TREES == 100, || format!("default t {}", cfg.trees))?;

    // Two labelsets separated by the sign of the first coordinate.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sets = [BTreeSet::from([0u32]), BTreeSet::from([0u32, 2])];
    let mut features = Vec::new();
    let mut labelsets = Vec::new();
    let mut rows = Vec::new();
    let mut classes = Vec::new();
    for i in 0..300 {
        let class = i % 2;
        let mut v: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        v[0] = if class == 0 { rng.gen_range(0.05..1.0) } else { rng.gen_range(-1.0..-0.05) };
        features.push(FusedFeature::from_blocks([FeatureBlock::new(Color, v.clone())]).unwrap());
        labelsets.push(sets[class].clone());
        rows.push(v);
        classes.push(class);
    }
    let model = labelpowerset_train(&features, &labelsets, &PowersetConfig::new(Shape, &cfg)).map_err(|e| e.to_string())?;
    ensure(model.tree_count() == 100, || format!("{} trees", model.tree_count()))?;
    let recovered = features
        .iter()
        .zip(&labelsets)
        .filter(|(f, s)| model.predict_labelset(f).unwrap() == *s)
        .count() as f64
        / features.len() as f64;

    let full = ForestParams { max_features: Some(16), bootstrap: false, ..ForestParams::default() };
    let tree = DecisionTree::fit(&rows, &classes, 2, (0..rows.len()).collect(), &full, &mut ChaCha8Rng::seed_from_u64(0));
    let oracle = rows.iter().zip(&classes).filter(|(r, c)| tree.predict(r) == **c).count() as f64 / rows.len() as f64;
    ensure(oracle == 1.0, || format!("single-tree oracle only recovers {oracle}"))?;
    ensure(recovered >= 0.95, || format!("LabelPowerset recovers {recovered}"))?;
    Ok(format!("recovery {recovered:.3} (tree oracle {oracle}), t=100, k=9"))
}

fn noisy_logo(rng: &mut ChaCha8Rng) -> RasterImage {
    let (w, h) = (rng.gen_range(12..40), rng.gen_range(12..40));
    let (x0, y0) = (rng.gen_range(1..w / 3), rng.gen_range(1..h / 3));
    let (x1, y1) = (rng.gen_range(2 * w / 3..w - 1), rng.gen_range(2 * h / 3..h - 1));
    let mut img = RasterImage::from_fn(w, h, |x, y| {
        if (x0..=x1).contains(&x) && (y0..=y1).contains(&y) {
            [rng.gen(), rng.gen(), rng.gen()]
        } else {
            [255, 255, 255]
        }
    });
    // Non-background corners of the content box keep the second crop stable.
    for (x, y) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
        img.set_pixel(x, y, [0, 0, 0]);
    }
    img
}

fn preprocess_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..500 {
        let img = noisy_logo(&mut rng);
        let once = crop_uniform_border(&img, 8);
        ensure(crop_uniform_border(&once, 8) == once, || format!("logo {i}: crop not idempotent"))?;
    }
    for i in 0..500 {
        let (w, h) = (rng.gen_range(4..30), rng.gen_range(4..30));
        let img = RasterImage::from_fn(w, h, |_, _| rng.gen());
        let mask = TextMask::from_fn(w, h, |_, _| rng.gen_bool(0.2));
        let (out, _) = fill_text_region_with(&img, &mask, 8).map_err(|e| e.to_string())?;
        for y in 0..h {
            for x in 0..w {
                ensure(mask.get(x, y) || out.pixel(x, y) == img.pixel(x, y), || format!("case {i}: ({x},{y}) changed"))?;
            }
        }
    }
    let img = RasterImage::from_fn(20, 20, |x, y| {
        if (6..14).contains(&x) && (8..12).contains(&y) {
            [10, 20, 30]
        } else if x < 2 {
            [200, 0, 0]
        } else {
            [252, 255, 250]
        }
    });
    let mask = TextMask::from_fn(20, 20, |x, y| (6..14).contains(&x) && (8..12).contains(&y));
    let (out, mode) = fill_text_region_with(&img, &mask, 8).map_err(|e| e.to_string())?;
    ensure(mode == FillMode::White, || format!("fill mode {mode:?}"))?;
    ensure(out.pixel(9, 9) == [255, 255, 255], || format!("filled {:?}", out.pixel(9, 9)))?;
    Ok("crop idempotent on 500 logos, mask locality on 500 masks, white fill exact".into())
}

fn main() -> ExitCode {
    // Sanity check that the crate's distance is the textbook one.
    debug_assert_eq!(euclidean(&[0.0, 3.0], &[4.0, 0.0]), 5.0);
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("metric oracle suite", metric_oracle),
        ("NAR closed forms", nar_closed_forms),
        ("weighted distance properties", weighted_distance_properties),
        ("taxonomy cardinalities", taxonomy_cardinalities),
        ("BRkNN equals kNN vote scores", brknn_identity),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("query_knn exactness", knn_exactness),
        ("LabelPowerset sanity", labelpowerset_sanity),
        ("preprocess invariants", preprocess_checks),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
