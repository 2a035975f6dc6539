use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::Value;

use logofuse_core::Error as CoreError;

/// An error with an HTTP status and a machine-readable code.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

#[derive(Serialize)]
struct Body<'a> {
    error: Inner<'a>,
}

#[derive(Serialize)]
struct Inner<'a> {
    code: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<&'a Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_built() -> Self {
        Self::new(StatusCode::CONFLICT, "index_not_built", "no index is loaded")
    }

    pub fn with_details(mut self, details: impl Serialize) -> Self {
        self.details = serde_json::to_value(details).ok();
        self
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.status.as_u16(), self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        use CoreError::*;
        let (status, code) = match &e {
            InvalidWeights(_) => (StatusCode::BAD_REQUEST, "invalid_weights"),
            UnknownKind(_) => (StatusCode::BAD_REQUEST, "unknown_kind"),
            InvalidCode { .. } => (StatusCode::BAD_REQUEST, "invalid_code"),
            MissingBlock(_) | BlockDimension { .. } | Schema(_) => (StatusCode::BAD_REQUEST, "incompatible_query"),
            InvalidConfig(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
            Image(_) | DimensionMismatch { .. } => (StatusCode::BAD_REQUEST, "invalid_image"),
            UnknownId(_) => (StatusCode::NOT_FOUND, "unknown_id"),
            ManifestRejected { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "manifest_rejected"),
            NoEvaluableSamples(_) => (StatusCode::UNPROCESSABLE_ENTITY, "no_evaluable_samples"),
            ShapeMismatch { .. } | InvalidMatrix(_) | InvalidRanks(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_evaluation")
            }
            DuplicateId(_) | Unnormalized { .. } | EmbeddingStore(_) | Truncated(_) | EmptyTrainingSet => {
                (StatusCode::UNPROCESSABLE_ENTITY, "build_failed")
            }
            Io(err) if err.kind() == std::io::ErrorKind::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            LabelTable { .. } | ModelFile(_) | Io(_) | Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: Inner {
                code: self.code,
                message: &self.message,
                details: self.details.as_ref(),
            },
        };
        (self.status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
