//! HTTP routes over an atomically swapped index snapshot.

use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query as UrlQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use logofuse_core::{Error as CoreError, Taxonomy};

use crate::error::{ApiError, ApiResult};
use crate::ops;
use crate::snapshot::{manifest_report, BuildOptions, Snapshot};
use crate::wire::*;

/// Shared server state. Readers clone the current snapshot `Arc` and never
/// see a half-built index; builds run on the side and swap in whole.
pub struct AppState {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    data_root: PathBuf,
    taxonomy: &'static Taxonomy,
    build: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        Self {
            snapshot: RwLock::new(None),
            data_root: data_root.into(),
            taxonomy: Taxonomy::embedded(),
            build: tokio::sync::Mutex::new(()),
        }
    }

    pub fn with_snapshot(self, snapshot: Snapshot) -> Self {
        self.swap(snapshot);
        self
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn swap(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock") = Some(Arc::new(snapshot));
    }

    /// Resolves a request path against the data root.
    pub fn resolve(&self, path: &str) -> PathBuf {
        self.data_root.join(path)
    }

    fn loaded(&self) -> ApiResult<Arc<Snapshot>> {
        self.current().ok_or_else(ApiError::not_built)
    }
}

type Shared = Arc<AppState>;

pub fn router(state: Shared, ui: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/labels", get(labels))
        .route("/presets", get(presets))
        .route("/index/build", post(build))
        .route("/search", post(search))
        .route("/classify", post(classify))
        .route("/evaluate", post(evaluate))
        .route("/thumbnails/{id}", get(thumbnail))
        .with_state(state);
    match ui {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request("invalid_request", e.body_text()))
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn health(State(state): State<Shared>) -> Json<Health> {
    let snap = state.current();
    Json(Health {
        status: "ok",
        indexed: snap.as_ref().map(|s| s.index.len()),
        models: snap.map(|s| s.models.keys().map(|k| k.to_string()).collect()).unwrap_or_default(),
    })
}

#[derive(Deserialize)]
struct LabelsParams {
    kind: Option<String>,
}

async fn labels(State(state): State<Shared>, UrlQuery(p): UrlQuery<LabelsParams>) -> ApiResult<Json<Vec<LabelSpaceView>>> {
    ops::labels(p.kind.as_deref(), state.taxonomy).map(Json)
}

async fn presets() -> Json<Vec<PresetView>> {
    Json(ops::presets())
}

async fn build(State(state): State<Shared>, payload: Result<Json<BuildRequest>, JsonRejection>) -> ApiResult<Json<BuildReport>> {
    let req = body(payload)?;
    let mut opts = BuildOptions::new(state.resolve(&req.manifest));
    opts.features = req.features.as_deref().map(|p| state.resolve(p));
    opts.embeddings = req.embeddings.iter().map(|p| state.resolve(p)).collect();
    opts.train_lp = req.train_lp.iter().map(|k| ops::parse_kind(k)).collect::<ApiResult<_>>()?;
    if let Some(t) = req.trees {
        opts.trees = t;
    }
    let out = req.out.as_deref().map(|p| state.resolve(p));
    let _guard = state.build.lock().await;
    let taxonomy = state.taxonomy;
    let (snapshot, report) = blocking(move || {
        let (mut snapshot, report) = Snapshot::build(&opts, taxonomy).map_err(|e| match e {
            CoreError::ManifestRejected { .. } => {
                let details = manifest_report(&opts.manifest);
                ApiError::from(e).with_details(details)
            }
            other => ApiError::from(other),
        })?;
        if let Some(dir) = out {
            snapshot.save(&dir)?;
        }
        Ok((snapshot, report))
    })
    .await?;
    state.swap(snapshot);
    Ok(Json(report))
}

async fn search(State(state): State<Shared>, payload: Result<Json<SearchRequest>, JsonRejection>) -> ApiResult<Json<SearchResponse>> {
    let req = body(payload)?;
    let snap = state.loaded()?;
    let taxonomy = state.taxonomy;
    blocking(move || ops::search(&snap, &req, taxonomy)).await.map(Json)
}

async fn classify(
    State(state): State<Shared>,
    payload: Result<Json<ClassifyRequest>, JsonRejection>,
) -> ApiResult<Json<ClassifyResponse>> {
    let req = body(payload)?;
    let snap = state.loaded()?;
    let taxonomy = state.taxonomy;
    blocking(move || ops::classify(&snap, &req, taxonomy)).await.map(Json)
}

async fn evaluate(
    State(state): State<Shared>,
    payload: Result<Json<EvaluateRequest>, JsonRejection>,
) -> ApiResult<Json<EvaluateResponse>> {
    let req = body(payload)?;
    let snap = state.current();
    blocking(move || ops::evaluate(snap.as_deref(), &req)).await.map(Json)
}

async fn thumbnail(State(state): State<Shared>, UrlPath(id): UrlPath<u64>) -> ApiResult<Response> {
    let snap = state.loaded()?;
    let bytes = blocking(move || Ok(snap.thumbnail(id)?)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}
