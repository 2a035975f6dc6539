//! Raw image to fused feature: crop, text fill, resize, extract.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::{
    color_histogram_extractor, edge_orientation_extractor, generic_thumbnail_extractor,
    text_presence_extractor, FusedFeature,
};
use crate::mlsearch::{build_index, Annotations, IndexSchema, SearchIndex};
use crate::preprocess::{
    content_bounds, corner_majority, fill_text_region_with, resize_normalize, RasterImage, Rect,
    TextMask, DEFAULT_TOLERANCE,
};
use crate::store::{annotate, DatasetManifest, LogoRecord};
use crate::taxonomy::{CharacteristicKind, Taxonomy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    /// Per-channel tolerance for border cropping and the white fill.
    pub tolerance: u8,
    /// Blocks to compute.
    pub kinds: Vec<CharacteristicKind>,
    /// Feed the generic block the text-free image instead of the original.
    pub generic_text_free: bool,
    /// Directory, relative to the manifest root, holding `<id>.png` masks.
    pub mask_dir: String,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        use CharacteristicKind::*;
        Self {
            tolerance: DEFAULT_TOLERANCE,
            kinds: vec![Color, Shape, Text, Generic],
            generic_text_free: false,
            mask_dir: "masks".into(),
        }
    }
}

/// Runs preprocessing and the baseline extractors on one image. The mask,
/// if any, is cropped with the image. Color and generic blocks see the
/// image with its text; the shape block sees it with text filled.
pub fn extract_features(raw: &RasterImage, mask: Option<&TextMask>, cfg: &ExtractConfig) -> Result<FusedFeature> {
    let (cropped, mask) = match content_bounds(raw, cfg.tolerance) {
        Some(rect) => (raw.crop(rect), mask.map(|m| m.crop(rect))),
        None => {
            let px = Rect { x: 0, y: 0, width: 1, height: 1 };
            (RasterImage::filled(1, 1, corner_majority(raw)), mask.map(|m| m.crop(px)))
        }
    };
    let text_free = match &mask {
        Some(m) => fill_text_region_with(&cropped, m, cfg.tolerance)?.0,
        None => cropped.clone(),
    };
    let plain = resize_normalize(&cropped);
    let filled = mask.as_ref().map(|_| resize_normalize(&text_free));
    let filled_ref = filled.as_ref().unwrap_or(&plain);

    let mut fused = FusedFeature::new();
    for &kind in &cfg.kinds {
        let block = match kind {
            CharacteristicKind::Color => color_histogram_extractor(&plain),
            CharacteristicKind::Shape => edge_orientation_extractor(filled_ref),
            CharacteristicKind::Text => text_presence_extractor(mask.as_ref()),
            CharacteristicKind::Generic => {
                generic_thumbnail_extractor(if cfg.generic_text_free { filled_ref } else { &plain })
            }
            // No baseline extractor; these blocks come from embedding stores.
            CharacteristicKind::FigurativeMain | CharacteristicKind::FigurativeSub | CharacteristicKind::Sector => {
                continue
            }
        };
        fused.set(block);
    }
    Ok(fused)
}

/// Loads an image and its optional mask file, then extracts.
pub fn extract_file(image: impl AsRef<Path>, mask: Option<&Path>, cfg: &ExtractConfig) -> Result<FusedFeature> {
    let raw = RasterImage::load(image)?;
    let mask = mask.map(TextMask::load).transpose()?;
    extract_features(&raw, mask.as_ref(), cfg)
}

fn record_mask(manifest: &DatasetManifest, record: &LogoRecord, cfg: &ExtractConfig) -> Option<std::path::PathBuf> {
    let p = manifest.root.join(&cfg.mask_dir).join(format!("{}.png", record.id));
    p.is_file().then_some(p)
}

/// Extracts every record in parallel, preserving manifest order.
pub fn extract_manifest(manifest: &DatasetManifest, cfg: &ExtractConfig) -> Result<Vec<(u64, FusedFeature)>> {
    manifest
        .records
        .par_iter()
        .map(|r| {
            let mask = record_mask(manifest, r, cfg);
            Ok((r.id, extract_file(manifest.image_path(r), mask.as_deref(), cfg)?))
        })
        .collect()
}

/// Grouped label sets for every record.
pub fn manifest_annotations(manifest: &DatasetManifest, taxonomy: &Taxonomy) -> Result<BTreeMap<u64, Annotations>> {
    manifest
        .records
        .iter()
        .map(|r| Ok((r.id, annotate(r, taxonomy)?.labels)))
        .collect()
}

/// Builds an index over extracted features, annotating from the manifest.
/// Records without a feature are left out.
pub fn index_features(
    manifest: &DatasetManifest,
    features: Vec<(u64, FusedFeature)>,
    taxonomy: &Taxonomy,
) -> Result<SearchIndex> {
    let mut notes = manifest_annotations(manifest, taxonomy)?;
    notes.retain(|id, _| features.iter().any(|(f, _)| f == id));
    let schema = match features.first() {
        Some((_, f)) => IndexSchema::of(f),
        None => IndexSchema::new([]),
    };
    build_index(features, notes, schema)
}
