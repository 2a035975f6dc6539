//! Multi-label logo classification and retrieval over grouped Vienna
//! characteristics.
//!
//! The crate is organised by stage:
//!
//! - [`taxonomy`]: Vienna code parsing and the grouped label spaces.
//! - [`preprocess`]: border cropping, text-region filling, resizing.
//! - [`features`]: per-characteristic feature blocks, the weighted fused
//!   distance, baseline extractors and the `NCF1` embedding store.
//! - [`metrics`]: LRAP, label ranking loss, normalized average rank.
//! - [`mlsearch`]: exact weighted kNN, BRkNN and LabelPowerset.
//! - [`store`]: dataset manifests, splitting and synthetic corpora.
//! - [`pipeline`]: image to fused feature, wiring the stages above.

pub mod error;
pub mod features;
pub mod metrics;
pub mod mlsearch;
pub mod pipeline;
pub mod preprocess;
pub mod store;
pub mod taxonomy;

pub use error::{Error, Result};
pub use features::{FeatureBlock, FusedFeature, QueryWeights};
pub use taxonomy::{CharacteristicKind, Taxonomy, ViennaCode};
