use std::collections::BTreeMap;

use logofuse_core::store::{generate_synthetic_corpus, SyntheticSpec};
use logofuse_core::{CharacteristicKind, Taxonomy};
use logofuse_server::ops;
use logofuse_server::wire::{ClassifyRequest, Method, Query, SearchRequest};
use logofuse_server::{BuildOptions, LpInputs, Snapshot};

#[test]
fn reloaded_index_answers_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::new(40, 9).with_groups(2, 5);
    spec.canvas = 64;
    spec.text_fraction = 0.25;
    generate_synthetic_corpus(&spec, dir.path().join("corpus")).unwrap();

    let mut opts = BuildOptions::new(dir.path().join("corpus/manifest.jsonl"));
    opts.train_lp = vec![CharacteristicKind::Shape, CharacteristicKind::Color];
    opts.lp_inputs = LpInputs::Own;
    opts.trees = 12;
    let tax = Taxonomy::embedded();
    let (mut built, report) = Snapshot::build(&opts, tax).unwrap();
    assert_eq!(report.indexed, 40);
    assert_eq!(report.kinds, ["color", "shape", "text", "generic"]);
    built.save(&dir.path().join("idx")).unwrap();
    let loaded = Snapshot::load(&dir.path().join("idx"), tax).unwrap();
    assert_eq!(loaded.index.ids(), built.index.ids());
    assert_eq!(loaded.models.keys().collect::<Vec<_>>(), built.models.keys().collect::<Vec<_>>());
    for id in [1, 17, 40] {
        assert_eq!(loaded.thumbnail(id).unwrap(), built.thumbnail(id).unwrap());
    }

    for id in [1u64, 12, 33] {
        let search = SearchRequest {
            query: Query::Id(id),
            weights: Some(BTreeMap::from([("color".into(), 3.0), ("shape".into(), 7.0)])),
            preset: None,
            k: Some(40),
            method: None,
        };
        let a = serde_json::to_string(&ops::search(&built, &search, tax).unwrap()).unwrap();
        let b = serde_json::to_string(&ops::search(&loaded, &search, tax).unwrap()).unwrap();
        assert_eq!(a, b);
        for method in [Method::Knn, Method::Lp] {
            let classify = ClassifyRequest {
                query: Query::Id(id),
                kinds: vec!["shape".into(), "color".into()],
                method,
                k: None,
                weights: None,
                preset: None,
                floor: None,
            };
            let a = serde_json::to_string(&ops::classify(&built, &classify, tax).unwrap()).unwrap();
            let b = serde_json::to_string(&ops::classify(&loaded, &classify, tax).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn embedding_stores_join_the_index() {
    use logofuse_core::features::save_blocks;
    use logofuse_core::FeatureBlock;

    let dir = tempfile::tempdir().unwrap();
    let mut spec = SyntheticSpec::new(12, 2);
    spec.canvas = 48;
    let corpus = generate_synthetic_corpus(&spec, dir.path().join("corpus")).unwrap();
    // Neural codes for all but the last logo, which then drops out.
    let blocks: Vec<(u64, FeatureBlock)> = corpus.colors[..11]
        .iter()
        .map(|(id, _)| (*id, FeatureBlock::new(CharacteristicKind::FigurativeMain, vec![0.6, 0.8, *id as f64 * 0.0])))
        .collect();
    let store = dir.path().join("main.ncf");
    save_blocks(&store, CharacteristicKind::FigurativeMain, true, blocks.iter().map(|(i, b)| (*i, b))).unwrap();

    let mut opts = BuildOptions::new(dir.path().join("corpus/manifest.jsonl"));
    opts.embeddings = vec![store.clone()];
    let (snap, report) = Snapshot::build(&opts, Taxonomy::embedded()).unwrap();
    assert_eq!(report.indexed, 11);
    assert_eq!(report.missing_blocks, 1);
    assert!(report.kinds.contains(&"figurative_main".to_string()));
    let search = SearchRequest {
        query: Query::Id(1),
        weights: None,
        preset: Some("main70-shape30".into()),
        k: Some(3),
        method: None,
    };
    assert_eq!(ops::search(&snap, &search, Taxonomy::embedded()).unwrap().hits.len(), 3);

    // The same kind twice is a conflict.
    opts.embeddings = vec![store.clone(), store];
    assert!(Snapshot::build(&opts, Taxonomy::embedded()).is_err());
}
