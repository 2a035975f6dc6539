use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{norm, FeatureBlock, FusedFeature, Normalization, UNIT_NORM_TOLERANCE};
use crate::taxonomy::{CharacteristicKind, Taxonomy};

/// Label ids per labeled kind for one logo.
pub type Annotations = BTreeMap<CharacteristicKind, BTreeSet<u32>>;

/// The block kinds and dimensions every record carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSchema {
    pub dims: BTreeMap<CharacteristicKind, usize>,
    #[serde(default)]
    pub normalization: Normalization,
}

impl IndexSchema {
    pub fn new(dims: impl IntoIterator<Item = (CharacteristicKind, usize)>) -> Self {
        Self {
            dims: dims.into_iter().collect(),
            normalization: Normalization::PerBlock,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Schema of an existing feature.
    pub fn of(feature: &FusedFeature) -> Self {
        Self::new(feature.blocks().map(|b| (b.kind, b.dim())))
    }

    pub fn kinds(&self) -> impl Iterator<Item = CharacteristicKind> + '_ {
        self.dims.keys().copied()
    }

    pub fn check(&self, id: u64, feature: &FusedFeature) -> Result<()> {
        for (&kind, &dim) in &self.dims {
            let block = feature
                .get(kind)
                .ok_or_else(|| Error::Schema(format!("logo {id} lacks a {kind} block")))?;
            if block.dim() != dim {
                return Err(Error::Schema(format!(
                    "logo {id}: {kind} block has dimension {}, schema says {dim}",
                    block.dim()
                )));
            }
        }
        if let Some(extra) = feature.kinds().find(|k| !self.dims.contains_key(k)) {
            return Err(Error::Schema(format!("logo {id} has a {extra} block outside the schema")));
        }
        Ok(())
    }

    fn check_normalized(&self, id: u64, feature: &FusedFeature) -> Result<()> {
        let unit = |n: f64| n == 0.0 || (n - 1.0).abs() <= UNIT_NORM_TOLERANCE;
        match self.normalization {
            Normalization::PerBlock => {
                for b in feature.blocks() {
                    let n = b.norm();
                    if !unit(n) {
                        return Err(Error::Unnormalized { id, kind: b.kind, norm: n });
                    }
                }
            }
            Normalization::WholeVector => {
                let all: Vec<f64> = feature.blocks().flat_map(|b| b.values.iter().copied()).collect();
                let n = norm(&all);
                if !unit(n) {
                    let kind = feature.kinds().next().unwrap_or(CharacteristicKind::Generic);
                    return Err(Error::Unnormalized { id, kind, norm: n });
                }
            }
        }
        Ok(())
    }
}

/// Immutable searchable collection. Blocks are stored per kind as one flat
/// row-major buffer.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    schema: IndexSchema,
    ids: Vec<u64>,
    positions: HashMap<u64, usize>,
    blocks: BTreeMap<CharacteristicKind, Vec<f64>>,
    annotations: Vec<Annotations>,
}

/// Builds an index in the given record order. Annotations are optional per
/// logo; label ids are checked against the embedded label spaces.
pub fn build_index(
    records: Vec<(u64, FusedFeature)>,
    mut annotations: BTreeMap<u64, Annotations>,
    schema: IndexSchema,
) -> Result<SearchIndex> {
    let taxonomy = Taxonomy::embedded();
    let mut positions = HashMap::with_capacity(records.len());
    let mut ids = Vec::with_capacity(records.len());
    let mut blocks: BTreeMap<CharacteristicKind, Vec<f64>> = schema
        .dims
        .iter()
        .map(|(&k, &d)| (k, Vec::with_capacity(d * records.len())))
        .collect();
    let mut notes = Vec::with_capacity(records.len());

    for (id, feature) in records {
        schema.check(id, &feature)?;
        schema.check_normalized(id, &feature)?;
        if positions.insert(id, ids.len()).is_some() {
            return Err(Error::DuplicateId(id));
        }
        ids.push(id);
        for (kind, buf) in blocks.iter_mut() {
            buf.extend_from_slice(&feature.get(*kind).expect("checked by schema").values);
        }
        let note = annotations.remove(&id).unwrap_or_default();
        for (kind, labels) in &note {
            let n = taxonomy.label_count(*kind);
            if let Some(bad) = labels.iter().find(|&&l| l as usize >= n) {
                return Err(Error::Schema(format!(
                    "logo {id}: {kind} label {bad} outside a space of {n}"
                )));
            }
        }
        notes.push(note);
    }
    if let Some(orphan) = annotations.keys().next() {
        return Err(Error::UnknownId(*orphan));
    }
    Ok(SearchIndex {
        schema,
        ids,
        positions,
        blocks,
        annotations: notes,
    })
}

impl SearchIndex {
    pub fn schema(&self) -> &IndexSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Logo ids in build order.
    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn contains(&self, id: u64) -> bool {
        self.positions.contains_key(&id)
    }

    pub(crate) fn position(&self, id: u64) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    pub(crate) fn id_at(&self, pos: usize) -> u64 {
        self.ids[pos]
    }

    pub(crate) fn block_at(&self, kind: CharacteristicKind, pos: usize) -> Option<&[f64]> {
        let dim = *self.schema.dims.get(&kind)?;
        Some(&self.blocks[&kind][pos * dim..(pos + 1) * dim])
    }

    pub(crate) fn annotations_at(&self, pos: usize) -> &Annotations {
        &self.annotations[pos]
    }

    /// Reassembles a stored record.
    pub fn feature(&self, id: u64) -> Option<FusedFeature> {
        let pos = self.position(id)?;
        let blocks = self
            .schema
            .kinds()
            .map(|k| FeatureBlock::new(k, self.block_at(k, pos).unwrap().to_vec()));
        FusedFeature::from_blocks(blocks).ok()
    }

    pub fn annotations(&self, id: u64) -> Option<&Annotations> {
        self.position(id).map(|p| &self.annotations[p])
    }

    /// Labels of `kind` for a logo; empty when unannotated.
    pub fn labels(&self, id: u64, kind: CharacteristicKind) -> BTreeSet<u32> {
        self.annotations(id)
            .and_then(|a| a.get(&kind))
            .cloned()
            .unwrap_or_default()
    }
}
