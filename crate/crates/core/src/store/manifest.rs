use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlsearch::Annotations;
use crate::taxonomy::{parse_code, CharacteristicKind, GroupingOutcome, Taxonomy, ViennaCode, NICE_CLASSES};

pub const MANIFEST_VERSION: u32 = 1;
/// Share of invalid records above which loading fails.
pub const MAX_INVALID_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogoRecord {
    pub id: u64,
    /// Image path relative to the manifest root.
    pub path: String,
    pub vienna: Vec<String>,
    pub nice: Vec<u8>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub root: PathBuf,
    pub records: Vec<LogoRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvalidRecord {
    /// 1-based line number.
    pub line: usize,
    pub id: Option<u64>,
    pub reason: String,
}

/// Records rejected while loading a manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ManifestReport {
    pub total: usize,
    pub loaded: usize,
    pub invalid: Vec<InvalidRecord>,
}

impl ManifestReport {
    pub fn is_clean(&self) -> bool {
        self.invalid.is_empty()
    }
}

fn check_record(r: &LogoRecord) -> std::result::Result<(), String> {
    if r.path.is_empty() {
        return Err("empty path".into());
    }
    if Path::new(&r.path).is_absolute() {
        return Err(format!("path {:?} is not relative to the manifest root", r.path));
    }
    for code in &r.vienna {
        parse_code(code).map_err(|e| e.to_string())?;
    }
    if let Some(bad) = r.nice.iter().find(|&&n| n == 0 || n > NICE_CLASSES) {
        return Err(format!("Nice class {bad} outside 1..={NICE_CLASSES}"));
    }
    Ok(())
}

fn scan(text: &str) -> (Vec<LogoRecord>, ManifestReport) {
    let mut report = ManifestReport::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        report.total += 1;
        let result = serde_json::from_str::<LogoRecord>(line)
            .map_err(|e| (None, e.to_string()))
            .and_then(|r| match check_record(&r) {
                Err(e) => Err((Some(r.id), e)),
                Ok(()) if !seen.insert(r.id) => Err((Some(r.id), format!("duplicate logo id {}", r.id))),
                Ok(()) => Ok(r),
            });
        match result {
            Ok(r) => records.push(r),
            Err((id, reason)) => report.invalid.push(InvalidRecord {
                line: i + 1,
                id,
                reason,
            }),
        }
    }
    report.loaded = records.len();
    (records, report)
}

/// Checks every line without loading, for callers that want the full
/// report even when loading would abort.
pub fn validate_manifest(text: &str) -> ManifestReport {
    scan(text).1
}

/// Parses JSON-lines text. Invalid lines go into the report; more than
/// [`MAX_INVALID_FRACTION`] of them aborts.
pub fn parse_manifest(text: &str, root: impl Into<PathBuf>) -> Result<(DatasetManifest, ManifestReport)> {
    let root = root.into();
    let (records, report) = scan(text);
    let bad = report.invalid.len();
    if bad as f64 > MAX_INVALID_FRACTION * report.total as f64 {
        return Err(Error::ManifestRejected {
            path: root,
            invalid: bad,
            total: report.total,
        });
    }
    if bad > 0 {
        warn!("manifest: skipped {bad} of {} records", report.total);
    }
    Ok((
        DatasetManifest {
            version: MANIFEST_VERSION,
            root,
            records,
        },
        report,
    ))
}

/// Loads a manifest; its root is the directory containing the file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<(DatasetManifest, ManifestReport)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, root).map_err(|e| match e {
        Error::ManifestRejected { invalid, total, .. } => Error::ManifestRejected {
            path: path.to_path_buf(),
            invalid,
            total,
        },
        other => other,
    })
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for r in &manifest.records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

impl DatasetManifest {
    pub fn image_path(&self, record: &LogoRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    pub fn get(&self, id: u64) -> Option<&LogoRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &LogoRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

/// Shuffles record positions with a seeded ChaCha8 generator and marks the
/// first `floor(ratio * N + 0.5)` as training records. Record order is kept.
pub fn split_train_test(manifest: &DatasetManifest, ratio: f64, seed: u64) -> Result<DatasetManifest> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let n = manifest.records.len();
    let n_train = (ratio * n as f64 + 0.5).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train: HashSet<usize> = order[..n_train].iter().copied().collect();
    let mut out = manifest.clone();
    for (i, r) in out.records.iter_mut().enumerate() {
        r.split = if train.contains(&i) { Split::Train } else { Split::Test };
    }
    Ok(out)
}

/// Grouped labels of a record, plus the codes that were dropped and why.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Annotated {
    pub labels: Annotations,
    pub dropped: Vec<(String, String)>,
}

/// Groups a record's Vienna codes and Nice classes into label sets. Every
/// record gets exactly one text label; sectors come from Nice classes.
pub fn annotate(record: &LogoRecord, taxonomy: &Taxonomy) -> Result<Annotated> {
    let mut labels: BTreeMap<CharacteristicKind, BTreeSet<u32>> = BTreeMap::new();
    let mut dropped = Vec::new();
    for raw in &record.vienna {
        let code: ViennaCode = parse_code(raw)?;
        match taxonomy.group_code(&code) {
            GroupingOutcome::Mapped(refs) => {
                for r in refs {
                    labels.entry(r.kind).or_default().insert(r.label);
                }
            }
            GroupingOutcome::Dropped(reason) => dropped.push((raw.clone(), reason.to_string())),
        }
    }
    let (absent, present) = taxonomy.text_labels();
    let text = labels.entry(CharacteristicKind::Text).or_default();
    if text.is_empty() {
        text.insert(absent);
    } else {
        text.retain(|&l| l == present);
    }
    for &n in &record.nice {
        if let Some(label) = taxonomy.group_nice(n) {
            labels.entry(CharacteristicKind::Sector).or_default().insert(label);
        }
    }
    Ok(Annotated { labels, dropped })
}
