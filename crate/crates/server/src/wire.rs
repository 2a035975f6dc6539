//! JSON request and response bodies shared by the HTTP API and the CLI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use logofuse_core::store::ManifestReport;

/// A float written with exactly six decimals, so identical results give
/// byte-identical bodies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixed(pub f64);

impl Serialize for Fixed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut text = format!("{:.6}", self.0);
        if text == "-0.000000" {
            text.remove(0);
        }
        let raw = RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

/// A corpus logo or an uploaded image (base64 PNG or JPEG bytes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Query {
    Id(u64),
    Image(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    pub query: Query,
    /// Raw non-negative weight per characteristic name.
    #[serde(default)]
    pub weights: Option<BTreeMap<String, f64>>,
    /// Named server-side preset, used when `weights` is absent.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchHit {
    pub id: u64,
    pub distance: Fixed,
    pub thumbnail: String,
    pub labels: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResponse {
    pub method: &'static str,
    pub k: usize,
    /// The normalized weights the distance was computed with.
    pub weights: BTreeMap<String, Fixed>,
    pub truncated: bool,
    pub k_exceeds_index: bool,
    pub hits: Vec<SearchHit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Knn,
    Brknn,
    Lp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Knn => "knn",
            Method::Brknn => "brknn",
            Method::Lp => "lp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub query: Query,
    pub kinds: Vec<String>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub weights: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub preset: Option<String>,
    /// Suggestions must score above this; defaults to 0.02.
    #[serde(default)]
    pub floor: Option<f64>,
}

fn default_method() -> Method {
    Method::Knn
}

#[derive(Debug, Clone, Serialize)]
pub struct Suggestion {
    pub label: u32,
    pub name: String,
    pub confidence: Fixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyResponse {
    pub method: &'static str,
    pub floor: Fixed,
    pub suggestions: BTreeMap<String, Vec<Suggestion>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRequest {
    pub kind: String,
    /// CSV rows `logo-id,label-id,score`; a header row is allowed.
    pub predictions: String,
    /// CSV rows `logo-id,label-id`. Without it, truth comes from the index.
    #[serde(default)]
    pub truth: Option<String>,
    /// Near-duplicate groups for a leave-one-out NAR run on the index.
    #[serde(default)]
    pub groups: Option<Vec<Vec<u64>>>,
    #[serde(default)]
    pub weights: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateResponse {
    pub kind: String,
    pub lrap: Option<Fixed>,
    pub lrl: Option<Fixed>,
    pub nar: Option<Fixed>,
    pub evaluated: usize,
    pub skipped: usize,
    pub nar_queries: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelEntry {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelSpaceView {
    pub kind: String,
    pub labels: Vec<LabelEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetView {
    pub name: &'static str,
    pub weights: BTreeMap<String, Fixed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildRequest {
    /// Manifest path, relative to the data root.
    pub manifest: String,
    /// Directory of `<kind>.ncf` stores; features are extracted when absent.
    #[serde(default)]
    pub features: Option<String>,
    /// Extra embedding stores merged into every record.
    #[serde(default)]
    pub embeddings: Vec<String>,
    /// Kinds to train a label powerset model for.
    #[serde(default)]
    pub train_lp: Vec<String>,
    #[serde(default)]
    pub trees: Option<usize>,
    /// Directory to persist the built index to.
    #[serde(default)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub indexed: usize,
    pub missing_blocks: usize,
    pub kinds: Vec<String>,
    /// Atomic labelset classes per trained model.
    pub models: BTreeMap<String, usize>,
    pub manifest: ManifestReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub indexed: Option<usize>,
    pub models: Vec<String>,
}
