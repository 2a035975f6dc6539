//! HTTP service and command line over `logofuse-core`: index building,
//! weighted search, label suggestions and evaluation.

pub mod app;
pub mod error;
pub mod ops;
pub mod snapshot;
pub mod wire;

pub use app::{router, AppState};
pub use error::{ApiError, ApiResult};
pub use snapshot::{BuildOptions, LpInputs, Snapshot};
