//! Dataset manifests, annotation grouping, train/test splits and the
//! synthetic corpus generator.

mod manifest;
mod synth;

pub use manifest::{
    annotate, load_manifest, parse_manifest, save_manifest, split_train_test, validate_manifest,
    Annotated, DatasetManifest, InvalidRecord, LogoRecord, ManifestReport, Split,
    MANIFEST_VERSION, MAX_INVALID_FRACTION,
};
pub use synth::{
    generate_synthetic_corpus, plan_corpus, render_logo, LogoDraw, SynthShape, SyntheticCorpus,
    SyntheticSpec, PALETTE, TEXT_CODE,
};
