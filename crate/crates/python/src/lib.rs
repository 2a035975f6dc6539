//! Python bindings. Features cross the boundary as `{kind: [float, ...]}`
//! dicts and weights as `{kind: float}` dicts.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyOSError, PyValueError};
use pyo3::prelude::*;

use logofuse_core::features::{weighted_distance as core_distance, FeatureBlock};
use logofuse_core::metrics::{self, GroundTruthMatrix, RankEvaluation, ScoreMatrix};
use logofuse_core::mlsearch::{
    self, brknn_classify, build_index, evaluate_nar as core_nar, knn_label_scores, labelpowerset_predict,
    labelpowerset_train, query_knn_excluding, Annotations, IndexSchema, PowersetConfig, SearchConfig,
};
use logofuse_core::pipeline::{extract_file, extract_manifest, index_features, ExtractConfig};
use logofuse_core::store::{generate_synthetic_corpus as core_synth, load_manifest, SyntheticSpec};
use logofuse_core::taxonomy::{parse_code, GroupingOutcome};
use logofuse_core::{CharacteristicKind, Error, FusedFeature, QueryWeights, Taxonomy};

type FeatureDict = BTreeMap<String, Vec<f64>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        Error::UnknownId(id) => PyKeyError::new_err(id),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for logofuse_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn kind(name: &str) -> PyResult<CharacteristicKind> {
    name.parse().py()
}

fn to_feature(d: &FeatureDict) -> PyResult<FusedFeature> {
    let blocks = d
        .iter()
        .map(|(k, v)| Ok(FeatureBlock::new(kind(k)?, v.clone())))
        .collect::<PyResult<Vec<_>>>()?;
    FusedFeature::from_blocks(blocks).py()
}

fn from_feature(f: &FusedFeature) -> FeatureDict {
    f.blocks().map(|b| (b.kind.to_string(), b.values.clone())).collect()
}

fn to_weights(w: &BTreeMap<String, f64>) -> PyResult<QueryWeights> {
    let raw = w.iter().map(|(k, v)| Ok((kind(k)?, *v))).collect::<PyResult<Vec<_>>>()?;
    QueryWeights::new(raw).py()
}

/// A stored logo id or a feature dict.
#[derive(FromPyObject)]
enum QueryArg {
    Id(u64),
    Feature(FeatureDict),
}

/// Normalizes raw weights to sum to one.
#[pyfunction]
fn normalize_weights(weights: BTreeMap<String, f64>) -> PyResult<BTreeMap<String, f64>> {
    Ok(to_weights(&weights)?.positive().map(|(k, v)| (k.to_string(), v)).collect())
}

/// Weighted mean of per-kind Euclidean distances.
#[pyfunction]
fn weighted_distance(a: FeatureDict, b: FeatureDict, weights: BTreeMap<String, f64>) -> PyResult<f64> {
    core_distance(&to_feature(&a)?, &to_feature(&b)?, &to_weights(&weights)?).py()
}

/// How a Vienna code is grouped, as readable text.
#[pyfunction]
fn explain(code: &str) -> PyResult<String> {
    Ok(Taxonomy::embedded().explain(&parse_code(code).py()?))
}

/// `(kind, label id)` pairs a Vienna code maps to; empty when dropped.
#[pyfunction]
fn group_code(code: &str) -> PyResult<Vec<(String, u32)>> {
    Ok(match Taxonomy::embedded().group_code(&parse_code(code).py()?) {
        GroupingOutcome::Mapped(refs) => refs.into_iter().map(|r| (r.kind.to_string(), r.label)).collect(),
        GroupingOutcome::Dropped(_) => Vec::new(),
    })
}

/// Label names of a kind, indexed by label id.
#[pyfunction]
fn labels(kind_name: &str) -> PyResult<Vec<String>> {
    let space = Taxonomy::embedded()
        .space(kind(kind_name)?)
        .ok_or_else(|| PyValueError::new_err(format!("{kind_name} owns no labels")))?;
    Ok(space.labels.iter().map(|l| l.name.clone()).collect())
}

fn matrices(truth: Vec<Vec<u8>>, scores: Vec<Vec<f64>>) -> PyResult<(GroundTruthMatrix, ScoreMatrix)> {
    Ok((GroundTruthMatrix::from_rows(&truth).py()?, ScoreMatrix::from_rows(&scores).py()?))
}

/// Label ranking average precision over a 0/1 truth matrix.
#[pyfunction]
fn lrap(truth: Vec<Vec<u8>>, scores: Vec<Vec<f64>>) -> PyResult<f64> {
    let (y, f) = matrices(truth, scores)?;
    metrics::lrap(&y, &f).py()
}

/// Label ranking loss over a 0/1 truth matrix.
#[pyfunction]
fn lrl(truth: Vec<Vec<u8>>, scores: Vec<Vec<f64>>) -> PyResult<f64> {
    let (y, f) = matrices(truth, scores)?;
    metrics::lrl(&y, &f).py()
}

/// Normalized average rank of 1-based relevant ranks in a corpus of size N.
#[pyfunction]
fn nar(corpus_size: usize, ranks: Vec<usize>) -> PyResult<f64> {
    Ok(metrics::nar(&RankEvaluation::new(corpus_size, ranks).py()?))
}

/// Baseline features of an image file, with an optional text mask.
#[pyfunction]
#[pyo3(signature = (image, mask = None))]
fn extract_features(py: Python<'_>, image: PathBuf, mask: Option<PathBuf>) -> PyResult<FeatureDict> {
    let f = py
        .detach(|| extract_file(&image, mask.as_deref(), &ExtractConfig::default()))
        .py()?;
    Ok(from_feature(&f))
}

/// Renders a synthetic corpus and returns its duplicate groups and colors.
#[pyfunction]
#[pyo3(signature = (out_dir, n_logos, groups = 0, per_group = 10, seed = 0, text_fraction = 0.0))]
fn generate_synthetic_corpus(
    py: Python<'_>,
    out_dir: PathBuf,
    n_logos: usize,
    groups: usize,
    per_group: usize,
    seed: u64,
    text_fraction: f64,
) -> PyResult<(Vec<Vec<u64>>, Vec<(u64, String)>)> {
    let mut spec = SyntheticSpec::new(n_logos, seed).with_groups(groups, per_group);
    spec.text_fraction = text_fraction;
    let corpus = py.detach(|| core_synth(&spec, &out_dir)).py()?;
    Ok((corpus.groups, corpus.colors))
}

#[pyclass(name = "SearchIndex", module = "logofuse", frozen)]
struct PySearchIndex {
    inner: mlsearch::SearchIndex,
}

impl PySearchIndex {
    fn query(&self, q: &QueryArg) -> PyResult<(FusedFeature, Option<u64>)> {
        match q {
            QueryArg::Id(id) => {
                let f = self.inner.feature(*id).ok_or_else(|| PyKeyError::new_err(*id))?;
                Ok((f, Some(*id)))
            }
            QueryArg::Feature(d) => Ok((to_feature(d)?, None)),
        }
    }
}

#[pymethods]
impl PySearchIndex {
    /// `features` maps logo id to a feature dict; `annotations` maps logo id
    /// to `{kind: [label id, ...]}`.
    #[new]
    #[pyo3(signature = (features, annotations = None))]
    fn new(
        features: BTreeMap<u64, FeatureDict>,
        annotations: Option<BTreeMap<u64, BTreeMap<String, Vec<u32>>>>,
    ) -> PyResult<Self> {
        let records = features
            .iter()
            .map(|(id, d)| Ok((*id, to_feature(d)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let notes = annotations
            .unwrap_or_default()
            .into_iter()
            .map(|(id, m)| {
                let m = m.into_iter().map(|(k, s)| Ok((kind(&k)?, s.into_iter().collect()))).collect::<PyResult<Annotations>>()?;
                Ok((id, m))
            })
            .collect::<PyResult<BTreeMap<_, _>>>()?;
        let schema = records.first().map_or_else(|| IndexSchema::new([]), |(_, f)| IndexSchema::of(f));
        Ok(Self {
            inner: build_index(records, notes, schema).py()?,
        })
    }

    /// Extracts baseline features for every record of a manifest and
    /// annotates them from its Vienna codes and Nice classes.
    #[staticmethod]
    fn from_manifest(py: Python<'_>, path: PathBuf) -> PyResult<Self> {
        let inner = py
            .detach(|| {
                let (m, _) = load_manifest(&path)?;
                let features = extract_manifest(&m, &ExtractConfig::default())?;
                index_features(&m, features, Taxonomy::embedded())
            })
            .py()?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<u64> {
        self.inner.ids().to_vec()
    }

    fn feature(&self, id: u64) -> PyResult<FeatureDict> {
        self.inner.feature(id).map(|f| from_feature(&f)).ok_or_else(|| PyKeyError::new_err(id))
    }

    fn labels(&self, id: u64, kind_name: &str) -> PyResult<Vec<u32>> {
        if !self.inner.contains(id) {
            return Err(PyKeyError::new_err(id));
        }
        Ok(self.inner.labels(id, kind(kind_name)?).into_iter().collect())
    }

    /// Nearest `(id, distance)` pairs. A query by id can leave itself out.
    #[pyo3(signature = (query, weights, k = 9, exclude_self = false))]
    fn search(
        &self,
        py: Python<'_>,
        query: QueryArg,
        weights: BTreeMap<String, f64>,
        k: usize,
        exclude_self: bool,
    ) -> PyResult<Vec<(u64, f64)>> {
        let (q, id) = self.query(&query)?;
        let cfg = SearchConfig::new(to_weights(&weights)?).with_k(k);
        let exclude = id.filter(|_| exclude_self);
        let result = py.detach(|| query_knn_excluding(&self.inner, &q, &cfg, exclude)).py()?;
        Ok(result.hits.iter().map(|h| (h.id, h.distance)).collect())
    }

    /// Per-label confidences from the `k` nearest neighbors.
    #[pyo3(signature = (query, kind_name, weights, k = 9, method = "knn"))]
    fn classify(
        &self,
        py: Python<'_>,
        query: QueryArg,
        kind_name: &str,
        weights: BTreeMap<String, f64>,
        k: usize,
        method: &str,
    ) -> PyResult<Vec<f64>> {
        let (q, _) = self.query(&query)?;
        let kind = kind(kind_name)?;
        let cfg = SearchConfig::new(to_weights(&weights)?).with_k(k);
        let scores = match method {
            "knn" => py.detach(|| knn_label_scores(&self.inner, &q, &cfg, kind)),
            "brknn" => py.detach(|| brknn_classify(&self.inner, &q, &cfg, kind)),
            other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
        }
        .py()?;
        Ok(scores.scores)
    }

    /// Mean leave-one-out NAR over near-duplicate groups.
    fn evaluate_nar(&self, py: Python<'_>, groups: Vec<Vec<u64>>, weights: BTreeMap<String, f64>) -> PyResult<f64> {
        let cfg = SearchConfig::new(to_weights(&weights)?);
        Ok(py.detach(|| core_nar(&self.inner, &groups, &cfg)).py()?.mean)
    }
}

#[pyclass(name = "LabelPowerset", module = "logofuse", frozen)]
struct PyLabelPowerset {
    inner: mlsearch::LabelPowerset,
}

#[pymethods]
impl PyLabelPowerset {
    /// Trains on the indexed logos in `ids` (all by default) that carry at
    /// least one label of `kind`. `inputs` restricts the blocks used.
    #[staticmethod]
    #[pyo3(signature = (index, kind_name, ids = None, trees = 100, seed = 0x5eed, inputs = None))]
    fn train(
        py: Python<'_>,
        index: &PySearchIndex,
        kind_name: &str,
        ids: Option<Vec<u64>>,
        trees: usize,
        seed: u64,
        inputs: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let target = kind(kind_name)?;
        let ids = ids.unwrap_or_else(|| index.inner.ids().to_vec());
        let mut features = Vec::new();
        let mut labelsets = Vec::new();
        for id in ids {
            let f = index.inner.feature(id).ok_or_else(|| PyKeyError::new_err(id))?;
            let labels = index.inner.labels(id, target);
            if !labels.is_empty() {
                features.push(f);
                labelsets.push(labels);
            }
        }
        let base = SearchConfig::new(QueryWeights::one_hot(target)).with_trees(trees).with_seed(seed);
        let mut cfg = PowersetConfig::new(target, &base);
        if let Some(names) = inputs {
            cfg = cfg.with_inputs(names.iter().map(|n| kind(n)).collect::<PyResult<_>>()?);
        }
        let inner = py.detach(|| labelpowerset_train(&features, &labelsets, &cfg)).py()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: mlsearch::LabelPowerset::load(path).py()?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).py()
    }

    /// Per-label confidences for a feature dict.
    fn predict(&self, feature: FeatureDict) -> PyResult<Vec<f64>> {
        Ok(labelpowerset_predict(&self.inner, &to_feature(&feature)?).py()?.scores)
    }

    /// The labelset of the most voted atomic class.
    fn predict_labelset(&self, feature: FeatureDict) -> PyResult<Vec<u32>> {
        Ok(self.inner.predict_labelset(&to_feature(&feature)?).py()?.iter().copied().collect())
    }

    #[getter]
    fn classes(&self) -> Vec<Vec<u32>> {
        self.inner.classes().iter().map(|c| c.iter().copied().collect()).collect()
    }

    #[getter]
    fn tree_count(&self) -> usize {
        self.inner.tree_count()
    }
}

#[pymodule]
fn logofuse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySearchIndex>()?;
    m.add_class::<PyLabelPowerset>()?;
    m.add_function(wrap_pyfunction!(normalize_weights, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_distance, m)?)?;
    m.add_function(wrap_pyfunction!(explain, m)?)?;
    m.add_function(wrap_pyfunction!(group_code, m)?)?;
    m.add_function(wrap_pyfunction!(labels, m)?)?;
    m.add_function(wrap_pyfunction!(lrap, m)?)?;
    m.add_function(wrap_pyfunction!(lrl, m)?)?;
    m.add_function(wrap_pyfunction!(nar, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic_corpus, m)?)?;
    Ok(())
}
