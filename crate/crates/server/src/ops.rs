//! Request handling independent of transport.

use std::collections::{BTreeMap, BTreeSet};

use axum::http::StatusCode;
use base64::Engine;

use logofuse_core::metrics::{lrap_report, lrl_report};
use logofuse_core::mlsearch::{
    brknn_classify, evaluate_nar, knn_label_scores, label_matrices, labelpowerset_predict, query_knn, LabelScores,
    SearchConfig, DEFAULT_K,
};
use logofuse_core::pipeline::extract_features;
use logofuse_core::preprocess::RasterImage;
use logofuse_core::{CharacteristicKind, FusedFeature, QueryWeights, Taxonomy};

use crate::error::{ApiError, ApiResult};
use crate::snapshot::Snapshot;
use crate::wire::*;

/// Suggestions must score strictly above this unless a request overrides it.
pub const DEFAULT_FLOOR: f64 = 0.02;
/// Upper bound on `k`, which bounds response size.
pub const MAX_K: usize = 1000;

/// Weightings from the published experiments, by name.
pub const PRESETS: [(&str, &[(CharacteristicKind, f64)]); 6] = {
    use CharacteristicKind::*;
    [
        ("color30-shape70", &[(Color, 0.3), (Shape, 0.7)]),
        ("color70-shape30", &[(Color, 0.7), (Shape, 0.3)]),
        ("main70-shape30", &[(FigurativeMain, 0.7), (Shape, 0.3)]),
        ("color", &[(Color, 1.0)]),
        ("shape", &[(Shape, 1.0)]),
        ("generic", &[(Generic, 1.0)]),
    ]
};

pub fn presets() -> Vec<PresetView> {
    PRESETS
        .iter()
        .map(|(name, w)| PresetView {
            name,
            weights: w.iter().map(|(k, v)| (k.to_string(), Fixed(*v))).collect(),
        })
        .collect()
}

pub fn parse_kind(name: &str) -> ApiResult<CharacteristicKind> {
    Ok(name.parse::<CharacteristicKind>()?)
}

fn labeled_kind(name: &str) -> ApiResult<CharacteristicKind> {
    let kind = parse_kind(name)?;
    if !kind.is_labeled() {
        return Err(ApiError::bad_request("unknown_kind", format!("{kind} owns no labels")));
    }
    Ok(kind)
}

/// Explicit weights win; otherwise a named preset; otherwise `fallback`.
pub fn resolve_weights(
    weights: Option<&BTreeMap<String, f64>>,
    preset: Option<&str>,
    fallback: impl FnOnce() -> ApiResult<QueryWeights>,
) -> ApiResult<QueryWeights> {
    match (weights, preset) {
        (Some(_), Some(_)) => Err(ApiError::bad_request("invalid_weights", "give either weights or a preset")),
        (Some(raw), None) => {
            let raw = raw
                .iter()
                .map(|(k, v)| Ok((parse_kind(k)?, *v)))
                .collect::<ApiResult<Vec<_>>>()?;
            Ok(QueryWeights::new(raw)?)
        }
        (None, Some(name)) => {
            let (_, w) = PRESETS
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| ApiError::bad_request("unknown_preset", format!("no preset named {name:?}")))?;
            Ok(QueryWeights::new(w.iter().copied())?)
        }
        (None, None) => fallback(),
    }
}

fn weights_view(w: &QueryWeights) -> BTreeMap<String, Fixed> {
    w.positive().map(|(k, v)| (k.to_string(), Fixed(v))).collect()
}

fn check_k(k: Option<usize>) -> ApiResult<usize> {
    let k = k.unwrap_or(DEFAULT_K);
    if k == 0 || k > MAX_K {
        return Err(ApiError::bad_request("invalid_k", format!("k must be in 1..={MAX_K}, got {k}")));
    }
    Ok(k)
}

/// The stored feature of a corpus logo, or features extracted from an
/// uploaded image with the index's extraction settings.
pub fn query_feature(snap: &Snapshot, query: &Query) -> ApiResult<FusedFeature> {
    match query {
        Query::Id(id) => snap
            .index
            .feature(*id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_id", format!("logo {id} is not indexed"))),
        Query::Image(data) => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(data.trim())
                .map_err(|e| ApiError::bad_request("invalid_image", format!("image is not base64: {e}")))?;
            let raw = RasterImage::decode(&bytes)?;
            Ok(extract_features(&raw, None, &snap.extract)?)
        }
    }
}

/// Label names of an indexed logo, per kind.
pub fn logo_labels(snap: &Snapshot, id: u64, taxonomy: &Taxonomy) -> BTreeMap<String, Vec<String>> {
    snap.index
        .annotations(id)
        .map(|notes| {
            notes
                .iter()
                .filter(|(_, set)| !set.is_empty())
                .map(|(kind, set)| {
                    let names = set
                        .iter()
                        .map(|&l| taxonomy.label_name(*kind, l).unwrap_or("?").to_string())
                        .collect();
                    (kind.to_string(), names)
                })
                .collect()
        })
        .unwrap_or_default()
}

pub fn search(snap: &Snapshot, req: &SearchRequest, taxonomy: &Taxonomy) -> ApiResult<SearchResponse> {
    if let Some(m) = req.method.as_deref().filter(|m| *m != "knn") {
        return Err(ApiError::bad_request("unsupported_method", format!("search method {m:?} is not supported")));
    }
    let k = check_k(req.k)?;
    let weights = resolve_weights(req.weights.as_ref(), req.preset.as_deref(), || {
        Err(ApiError::bad_request("invalid_weights", "weights or a preset are required"))
    })?;
    let query = query_feature(snap, &req.query)?;
    let cfg = SearchConfig::new(weights).with_k(k);
    let result = query_knn(&snap.index, &query, &cfg)?;
    let hits = result
        .hits
        .iter()
        .map(|h| SearchHit {
            id: h.id,
            distance: Fixed(h.distance),
            thumbnail: format!("/thumbnails/{}", h.id),
            labels: logo_labels(snap, h.id, taxonomy),
        })
        .collect();
    Ok(SearchResponse {
        method: "knn",
        k,
        weights: weights_view(&cfg.weights),
        truncated: result.truncated,
        k_exceeds_index: result.k_exceeds_index,
        hits,
    })
}

/// Weights for kNN classification of `kind`: its own block when indexed,
/// otherwise every indexed block equally.
fn classify_fallback(snap: &Snapshot, kind: CharacteristicKind) -> ApiResult<QueryWeights> {
    let kinds: Vec<CharacteristicKind> = snap.index.schema().kinds().collect();
    if kinds.contains(&kind) {
        return Ok(QueryWeights::one_hot(kind));
    }
    Ok(QueryWeights::new(kinds.into_iter().map(|k| (k, 1.0)))?)
}

pub fn classify(snap: &Snapshot, req: &ClassifyRequest, taxonomy: &Taxonomy) -> ApiResult<ClassifyResponse> {
    if req.kinds.is_empty() {
        return Err(ApiError::bad_request("unknown_kind", "no kinds requested"));
    }
    let kinds = req.kinds.iter().map(|k| labeled_kind(k)).collect::<ApiResult<Vec<_>>>()?;
    let floor = req.floor.unwrap_or(DEFAULT_FLOOR);
    if !(0.0..=1.0).contains(&floor) {
        return Err(ApiError::bad_request("invalid_floor", format!("floor must be in [0, 1], got {floor}")));
    }
    let k = check_k(req.k)?;
    if req.method == Method::Lp {
        if let Some(kind) = kinds.iter().find(|k| !snap.models.contains_key(k)) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "model_missing",
                format!("no label powerset model is trained for {kind}"),
            ));
        }
    }
    let query = query_feature(snap, &req.query)?;
    let mut suggestions = BTreeMap::new();
    for kind in kinds {
        let scores: LabelScores = match req.method {
            Method::Lp => labelpowerset_predict(&snap.models[&kind], &query)?,
            method => {
                let w = resolve_weights(req.weights.as_ref(), req.preset.as_deref(), || classify_fallback(snap, kind))?;
                let cfg = SearchConfig::new(w).with_k(k);
                if method == Method::Knn {
                    knn_label_scores(&snap.index, &query, &cfg, kind)?
                } else {
                    brknn_classify(&snap.index, &query, &cfg, kind)?
                }
            }
        };
        let list = scores
            .ranked(floor)
            .into_iter()
            .filter(|&(_, s)| s > floor)
            .map(|(label, s)| Suggestion {
                label,
                name: taxonomy.label_name(kind, label).unwrap_or("?").to_string(),
                confidence: Fixed(s),
            })
            .collect();
        suggestions.insert(kind.to_string(), list);
    }
    Ok(ClassifyResponse {
        method: req.method.as_str(),
        floor: Fixed(floor),
        suggestions,
    })
}

fn csv_rows(text: &str, columns: usize, what: &str) -> ApiResult<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ApiError::bad_request("invalid_csv", format!("{what}: {e}")))?;
        if rec.len() != columns {
            return Err(ApiError::bad_request(
                "invalid_csv",
                format!("{what} row {}: expected {columns} fields, got {}", i + 1, rec.len()),
            ));
        }
        // A first row that does not start with a logo id is a header.
        if i == 0 && rec[0].parse::<u64>().is_err() {
            continue;
        }
        rows.push(rec);
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> ApiResult<T> {
    rec[i]
        .parse()
        .map_err(|_| ApiError::bad_request("invalid_csv", format!("{what}: cannot parse {:?}", &rec[i])))
}

/// Parses `logo-id,label-id,score` rows into per-logo score vectors.
pub fn parse_predictions(text: &str, kind: CharacteristicKind) -> ApiResult<BTreeMap<u64, LabelScores>> {
    let n = Taxonomy::embedded().label_count(kind);
    let mut out: BTreeMap<u64, (LabelScores, BTreeSet<u32>)> = BTreeMap::new();
    for rec in csv_rows(text, 3, "predictions")? {
        let id: u64 = field(&rec, 0, "predictions")?;
        let label: u32 = field(&rec, 1, "predictions")?;
        let score: f64 = field(&rec, 2, "predictions")?;
        if label as usize >= n {
            return Err(ApiError::bad_request("invalid_csv", format!("{kind} has no label {label}")));
        }
        if !score.is_finite() {
            return Err(ApiError::bad_request("invalid_csv", format!("logo {id}: score {score} is not finite")));
        }
        let (scores, seen) = out.entry(id).or_insert_with(|| {
            (
                LabelScores {
                    kind,
                    scores: vec![0.0; n],
                },
                BTreeSet::new(),
            )
        });
        if !seen.insert(label) {
            return Err(ApiError::bad_request("invalid_csv", format!("logo {id}: label {label} scored twice")));
        }
        scores.scores[label as usize] = score;
    }
    Ok(out.into_iter().map(|(id, (s, _))| (id, s)).collect())
}

/// Parses `logo-id,label-id` rows.
pub fn parse_truth(text: &str, kind: CharacteristicKind) -> ApiResult<BTreeMap<u64, BTreeSet<u32>>> {
    let n = Taxonomy::embedded().label_count(kind);
    let mut out: BTreeMap<u64, BTreeSet<u32>> = BTreeMap::new();
    for rec in csv_rows(text, 2, "truth")? {
        let id: u64 = field(&rec, 0, "truth")?;
        let label: u32 = field(&rec, 1, "truth")?;
        if label as usize >= n {
            return Err(ApiError::bad_request("invalid_csv", format!("{kind} has no label {label}")));
        }
        out.entry(id).or_default().insert(label);
    }
    Ok(out)
}

/// LRAP and LRL over a prediction file, plus NAR when groups are given.
/// Truth comes from the request or, failing that, the loaded index.
pub fn evaluate(snap: Option<&Snapshot>, req: &EvaluateRequest) -> ApiResult<EvaluateResponse> {
    let kind = labeled_kind(&req.kind)?;
    let predictions = parse_predictions(&req.predictions, kind)?;
    let mut response = EvaluateResponse {
        kind: kind.to_string(),
        lrap: None,
        lrl: None,
        nar: None,
        evaluated: 0,
        skipped: 0,
        nar_queries: 0,
    };
    if !predictions.is_empty() {
        let truth = match &req.truth {
            Some(text) => parse_truth(text, kind)?,
            None => {
                let snap = snap.ok_or_else(ApiError::not_built)?;
                predictions.keys().map(|&id| (id, snap.index.labels(id, kind))).collect()
            }
        };
        let rows: Vec<BTreeSet<u32>> = predictions.keys().map(|id| truth.get(id).cloned().unwrap_or_default()).collect();
        let scores: Vec<LabelScores> = predictions.into_values().collect();
        let (y, f) = label_matrices(&rows, &scores)?;
        let lrap = lrap_report(&y, &f)?;
        let lrl = lrl_report(&y, &f)?;
        response.lrap = Some(Fixed(lrap.value));
        response.lrl = Some(Fixed(lrl.value));
        response.evaluated = lrap.evaluated;
        response.skipped = lrap.skipped;
    }
    if let Some(groups) = &req.groups {
        let snap = snap.ok_or_else(ApiError::not_built)?;
        let weights = resolve_weights(req.weights.as_ref(), req.preset.as_deref(), || {
            Err(ApiError::bad_request("invalid_weights", "NAR needs weights or a preset"))
        })?;
        let report = evaluate_nar(&snap.index, groups, &SearchConfig::new(weights))?;
        response.nar = Some(Fixed(report.mean));
        response.nar_queries = report.per_query.len();
    }
    if response.lrap.is_none() && response.nar.is_none() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "no_evaluable_samples",
            "neither predictions nor groups were given",
        ));
    }
    Ok(response)
}

/// Label spaces, all labeled kinds or one.
pub fn labels(kind: Option<&str>, taxonomy: &Taxonomy) -> ApiResult<Vec<LabelSpaceView>> {
    let kinds = match kind {
        Some(k) => vec![labeled_kind(k)?],
        None => CharacteristicKind::ALL.into_iter().filter(|k| k.is_labeled()).collect(),
    };
    Ok(kinds
        .into_iter()
        .map(|kind| LabelSpaceView {
            kind: kind.to_string(),
            labels: taxonomy
                .space(kind)
                .map(|s| {
                    s.labels
                        .iter()
                        .map(|l| LabelEntry {
                            id: l.id,
                            name: l.name.clone(),
                        })
                        .collect()
                })
                .unwrap_or_default(),
        })
        .collect())
}
