//! An immutable, queryable index plus everything needed to answer requests
//! about it, and its on-disk directory form.
//!
//! ```text
//! index.json          IndexMeta
//! <kind>.ncf          one embedding store per block kind
//! models/<kind>.lpf   label powerset models
//! thumbnails/<id>.png
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use logofuse_core::features::{import_neural_codes, save_blocks, FeatureBlock};
use logofuse_core::mlsearch::{labelpowerset_train, LabelPowerset, PowersetConfig, SearchConfig, SearchIndex};
use logofuse_core::pipeline::{extract_manifest, index_features, ExtractConfig};
use logofuse_core::preprocess::RasterImage;
use logofuse_core::store::{load_manifest, validate_manifest, DatasetManifest, ManifestReport, Split};
use logofuse_core::{CharacteristicKind, Error, FusedFeature, QueryWeights, Result, Taxonomy};

use crate::wire::BuildReport;

pub const INDEX_META: &str = "index.json";
pub const INDEX_VERSION: u32 = 1;
pub const THUMBNAIL_SIDE: u32 = 96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub version: u32,
    pub manifest: PathBuf,
    pub extract: ExtractConfig,
    pub stores: BTreeMap<CharacteristicKind, String>,
    pub models: BTreeMap<CharacteristicKind, String>,
    pub thumbnails: bool,
}

/// Which blocks a label powerset model reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpInputs {
    /// Every block of the index, concatenated.
    #[default]
    Fused,
    /// Only the block of the predicted kind.
    Own,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub manifest: PathBuf,
    pub features: Option<PathBuf>,
    pub embeddings: Vec<PathBuf>,
    pub extract: ExtractConfig,
    pub train_lp: Vec<CharacteristicKind>,
    pub lp_inputs: LpInputs,
    pub trees: usize,
    pub seed: u64,
}

impl BuildOptions {
    pub fn new(manifest: impl Into<PathBuf>) -> Self {
        let defaults = SearchConfig::new(QueryWeights::one_hot(CharacteristicKind::Generic));
        Self {
            manifest: manifest.into(),
            features: None,
            embeddings: Vec::new(),
            extract: ExtractConfig::default(),
            train_lp: Vec::new(),
            lp_inputs: LpInputs::default(),
            trees: defaults.trees,
            seed: defaults.seed,
        }
    }
}

pub struct Snapshot {
    pub manifest_path: PathBuf,
    pub manifest: DatasetManifest,
    pub index: SearchIndex,
    pub models: BTreeMap<CharacteristicKind, LabelPowerset>,
    pub extract: ExtractConfig,
    /// Directory of pre-rendered thumbnails, if the index was persisted.
    pub thumbnails: Option<PathBuf>,
}

type Stores = BTreeMap<CharacteristicKind, BTreeMap<u64, FeatureBlock>>;

/// Reads every `*.ncf` file of a directory, one store per kind.
pub fn load_stores(dir: &Path) -> Result<Stores> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ncf"))
        .collect();
    paths.sort();
    let mut stores = Stores::new();
    for p in paths {
        merge_store(&mut stores, &p)?;
    }
    Ok(stores)
}

fn merge_store(stores: &mut Stores, path: &Path) -> Result<()> {
    let (header, blocks) = import_neural_codes(path)?;
    if stores.insert(header.kind, blocks).is_some() {
        return Err(Error::Schema(format!("second {} store at {}", header.kind, path.display())));
    }
    Ok(())
}

/// Splits fused features into per-kind stores. Values are narrowed to f32,
/// the precision stores keep on disk, so an index behaves the same whether
/// it was just built or reloaded.
fn into_stores(features: Vec<(u64, FusedFeature)>) -> Stores {
    let mut stores = Stores::new();
    for (id, f) in features {
        for b in f.blocks() {
            let values = b.values.iter().map(|&v| v as f32 as f64).collect();
            stores.entry(b.kind).or_default().insert(id, FeatureBlock::new(b.kind, values));
        }
    }
    stores
}

/// Fuses the stores for every manifest record holding all kinds, in
/// manifest order. Returns the features and the number of records left out.
fn assemble(manifest: &DatasetManifest, stores: &Stores) -> Result<(Vec<(u64, FusedFeature)>, usize)> {
    if stores.is_empty() {
        return Err(Error::Schema("no feature stores".into()));
    }
    let mut out = Vec::with_capacity(manifest.records.len());
    let mut missing = 0;
    for r in &manifest.records {
        let blocks: Option<Vec<FeatureBlock>> = stores.values().map(|s| s.get(&r.id).cloned()).collect();
        match blocks {
            Some(blocks) => out.push((r.id, FusedFeature::from_blocks(blocks)?)),
            None => missing += 1,
        }
    }
    if missing > 0 {
        warn!("{missing} records lack a block in some store and were left out");
    }
    Ok((out, missing))
}

fn train_models(
    index: &SearchIndex,
    manifest: &DatasetManifest,
    kinds: &[CharacteristicKind],
    inputs: LpInputs,
    trees: usize,
    seed: u64,
) -> Result<BTreeMap<CharacteristicKind, LabelPowerset>> {
    let train: Vec<u64> = manifest
        .split(Split::Train)
        .map(|r| r.id)
        .filter(|&id| index.contains(id))
        .collect();
    let cfg = SearchConfig::new(QueryWeights::one_hot(CharacteristicKind::Generic))
        .with_trees(trees)
        .with_seed(seed);
    let mut models = BTreeMap::new();
    for &kind in kinds {
        let (features, labelsets): (Vec<FusedFeature>, Vec<BTreeSet<u32>>) = train
            .iter()
            .filter_map(|&id| {
                let labels = index.labels(id, kind);
                (!labels.is_empty()).then(|| (index.feature(id).expect("indexed"), labels))
            })
            .unzip();
        let mut lp = PowersetConfig::new(kind, &cfg);
        if inputs == LpInputs::Own {
            lp = lp.with_inputs(vec![kind]);
        }
        info!("training {kind} label powerset on {} logos", features.len());
        models.insert(kind, labelpowerset_train(&features, &labelsets, &lp)?);
    }
    Ok(models)
}

impl Snapshot {
    /// Loads the manifest and features, builds the index and trains the
    /// requested models.
    pub fn build(opts: &BuildOptions, taxonomy: &Taxonomy) -> Result<(Snapshot, BuildReport)> {
        let (manifest, report) = load_manifest(&opts.manifest)?;
        let mut stores = match &opts.features {
            Some(dir) => load_stores(dir)?,
            None => into_stores(extract_manifest(&manifest, &opts.extract)?),
        };
        for p in &opts.embeddings {
            merge_store(&mut stores, p)?;
        }
        let (features, missing) = assemble(&manifest, &stores)?;
        let index = index_features(&manifest, features, taxonomy)?;
        let models = train_models(&index, &manifest, &opts.train_lp, opts.lp_inputs, opts.trees, opts.seed)?;
        let report = BuildReport {
            indexed: index.len(),
            missing_blocks: missing,
            kinds: stores.keys().map(|k| k.to_string()).collect(),
            models: models.iter().map(|(k, m)| (k.to_string(), m.classes().len())).collect(),
            manifest: report,
        };
        let snapshot = Snapshot {
            manifest_path: opts.manifest.clone(),
            manifest,
            index,
            models,
            extract: opts.extract.clone(),
            thumbnails: None,
        };
        Ok((snapshot, report))
    }

    /// Writes the index directory, including thumbnails.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("models"))?;
        let kinds: Vec<CharacteristicKind> = self.index.schema().kinds().collect();
        let mut stores = BTreeMap::new();
        for kind in kinds {
            let name = format!("{kind}.ncf");
            let blocks: Vec<(u64, FeatureBlock)> = self
                .index
                .ids()
                .iter()
                .map(|&id| (id, self.index.feature(id).expect("indexed").get(kind).expect("in schema").clone()))
                .collect();
            save_blocks(dir.join(&name), kind, true, blocks.iter().map(|(id, b)| (*id, b)))?;
            stores.insert(kind, name);
        }
        let mut models = BTreeMap::new();
        for (kind, model) in &self.models {
            let name = format!("models/{kind}.lpf");
            model.save(dir.join(&name))?;
            models.insert(*kind, name);
        }
        let thumbs = dir.join("thumbnails");
        write_thumbnails(&self.manifest, self.index.ids(), &thumbs)?;
        self.thumbnails = Some(thumbs);
        let meta = IndexMeta {
            version: INDEX_VERSION,
            manifest: fs::canonicalize(&self.manifest_path)?,
            extract: self.extract.clone(),
            stores,
            models,
            thumbnails: true,
        };
        fs::write(dir.join(INDEX_META), serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(dir: &Path, taxonomy: &Taxonomy) -> Result<Snapshot> {
        let meta: IndexMeta = serde_json::from_slice(&fs::read(dir.join(INDEX_META))?)?;
        if meta.version != INDEX_VERSION {
            return Err(Error::Schema(format!("index version {} is not supported", meta.version)));
        }
        let (manifest, _) = load_manifest(&meta.manifest)?;
        let mut stores = Stores::new();
        for name in meta.stores.values() {
            merge_store(&mut stores, &dir.join(name))?;
        }
        let (features, _) = assemble(&manifest, &stores)?;
        let index = index_features(&manifest, features, taxonomy)?;
        let models = meta
            .models
            .iter()
            .map(|(kind, name)| Ok((*kind, LabelPowerset::load(dir.join(name))?)))
            .collect::<Result<_>>()?;
        Ok(Snapshot {
            manifest_path: meta.manifest,
            manifest,
            index,
            models,
            extract: meta.extract,
            thumbnails: meta.thumbnails.then(|| dir.join("thumbnails")),
        })
    }

    /// PNG thumbnail of an indexed logo, from disk when pre-rendered.
    pub fn thumbnail(&self, id: u64) -> Result<Vec<u8>> {
        if !self.index.contains(id) {
            return Err(Error::UnknownId(id));
        }
        if let Some(dir) = &self.thumbnails {
            let p = dir.join(format!("{id}.png"));
            if p.is_file() {
                return Ok(fs::read(p)?);
            }
        }
        let record = self.manifest.get(id).ok_or(Error::UnknownId(id))?;
        render_thumbnail(&self.manifest.image_path(record))
    }
}

/// Reports on a manifest file without loading it, for error bodies.
pub fn manifest_report(path: &Path) -> Option<ManifestReport> {
    fs::read_to_string(path).ok().map(|t| validate_manifest(&t))
}

fn render_thumbnail(path: &Path) -> Result<Vec<u8>> {
    let img = RasterImage::load(path)?.to_rgb_image();
    let scale = THUMBNAIL_SIDE as f64 / img.width().max(img.height()) as f64;
    let (w, h) = if scale < 1.0 {
        (
            ((img.width() as f64 * scale).round() as u32).max(1),
            ((img.height() as f64 * scale).round() as u32).max(1),
        )
    } else {
        (img.width(), img.height())
    };
    let thumb = image::imageops::thumbnail(&img, w, h);
    let mut out = Vec::new();
    thumb.write_to(&mut Cursor::new(&mut out), image::ImageFormat::Png)?;
    Ok(out)
}

fn write_thumbnails(manifest: &DatasetManifest, ids: &[u64], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    ids.par_iter().try_for_each(|&id| {
        let record = manifest.get(id).ok_or(Error::UnknownId(id))?;
        let bytes = render_thumbnail(&manifest.image_path(record))?;
        fs::write(dir.join(format!("{id}.png")), bytes)?;
        Ok(())
    })
}
