use std::path::PathBuf;

use crate::taxonomy::CharacteristicKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid Vienna code {input:?}: {field} {problem}")]
    InvalidCode {
        input: String,
        field: &'static str,
        problem: String,
    },

    #[error("label table line {line}: {message}")]
    LabelTable { line: usize, message: String },

    #[error("unknown characteristic {0:?}")]
    UnknownKind(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("no {0} block present for a positively weighted characteristic")]
    MissingBlock(CharacteristicKind),

    #[error("{kind} block has dimension {actual}, expected {expected}")]
    BlockDimension {
        kind: CharacteristicKind,
        expected: usize,
        actual: usize,
    },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("matrix shape mismatch: ground truth {truth:?}, scores {scores:?}")]
    ShapeMismatch {
        truth: (usize, usize),
        scores: (usize, usize),
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("no sample can be evaluated: {0}")]
    NoEvaluableSamples(&'static str),

    #[error("invalid rank evaluation: {0}")]
    InvalidRanks(String),

    #[error("duplicate logo id {0}")]
    DuplicateId(u64),

    #[error("unknown logo id {0}")]
    UnknownId(u64),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("{kind} block of logo {id} is not l2-normalized (norm {norm})")]
    Unnormalized {
        id: u64,
        kind: CharacteristicKind,
        norm: f64,
    },

    #[error("embedding store: {0}")]
    EmbeddingStore(String),

    #[error("embedding store truncated: {0}")]
    Truncated(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("manifest {path}: {invalid} of {total} records invalid, aborting")]
    ManifestRejected {
        path: PathBuf,
        invalid: usize,
        total: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
