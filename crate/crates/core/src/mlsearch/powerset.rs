//! LabelPowerset: each distinct training labelset becomes one class of a
//! random forest.
//!
//! Model files are little-endian:
//!
//! ```text
//! magic "LPF1", version u32
//! seed u64, trees u32, max_features u32 (0 = sqrt), min_samples_leaf u32,
//! max_depth u32 (0 = unbounded), bootstrap u8
//! kind u8, label count u32, input kind count u8, {kind u8, dim u32}...
//! class count u32, {size u32, label u32...}...
//! per tree: node count u32, per node tag u8 then
//!   0 (split): feature u32, threshold f64, left u32, right u32
//!   1 (leaf):  class count x f64
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::forest::{argmax, Node};
use super::{labeled_kind, DecisionTree, ForestParams, LabelScores, RandomForest, SearchConfig};
use crate::error::{Error, Result};
use crate::features::FusedFeature;
use crate::taxonomy::CharacteristicKind;

const MODEL_MAGIC: &[u8; 4] = b"LPF1";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PowersetConfig {
    /// The characteristic whose labels are predicted.
    pub kind: CharacteristicKind,
    /// Blocks concatenated into the forest input, in this order. `None`
    /// uses every block of the first training sample.
    pub inputs: Option<Vec<CharacteristicKind>>,
    pub forest: ForestParams,
}

impl PowersetConfig {
    pub fn new(kind: CharacteristicKind, cfg: &SearchConfig) -> Self {
        Self {
            kind,
            inputs: None,
            forest: ForestParams {
                trees: cfg.trees,
                seed: cfg.seed,
                ..ForestParams::default()
            },
        }
    }

    pub fn with_inputs(mut self, inputs: Vec<CharacteristicKind>) -> Self {
        self.inputs = Some(inputs);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelPowerset {
    kind: CharacteristicKind,
    n_labels: usize,
    inputs: Vec<(CharacteristicKind, usize)>,
    /// Atomic classes in sorted labelset order.
    classes: Vec<BTreeSet<u32>>,
    forest: RandomForest,
}

fn input_row(inputs: &[(CharacteristicKind, usize)], feature: &FusedFeature) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(inputs.iter().map(|(_, d)| d).sum());
    for &(kind, dim) in inputs {
        let block = feature.get(kind).ok_or(Error::MissingBlock(kind))?;
        if block.dim() != dim {
            return Err(Error::BlockDimension {
                kind,
                expected: dim,
                actual: block.dim(),
            });
        }
        row.extend_from_slice(&block.values);
    }
    Ok(row)
}

pub fn labelpowerset_train(
    features: &[FusedFeature],
    labelsets: &[BTreeSet<u32>],
    cfg: &PowersetConfig,
) -> Result<LabelPowerset> {
    let n_labels = labeled_kind(cfg.kind)?;
    let first = features.first().ok_or(Error::EmptyTrainingSet)?;
    if features.len() != labelsets.len() {
        return Err(Error::InvalidConfig(format!(
            "{} features but {} labelsets",
            features.len(),
            labelsets.len()
        )));
    }
    let input_kinds: Vec<CharacteristicKind> = match &cfg.inputs {
        Some(k) => k.clone(),
        None => first.kinds().collect(),
    };
    let inputs = input_kinds
        .iter()
        .map(|&k| Ok((k, first.get(k).ok_or(Error::MissingBlock(k))?.dim())))
        .collect::<Result<Vec<_>>>()?;

    for (i, set) in labelsets.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::InvalidConfig(format!("training sample {i} has an empty labelset")));
        }
        if let Some(bad) = set.iter().find(|&&l| l as usize >= n_labels) {
            return Err(Error::InvalidConfig(format!(
                "training sample {i}: {} label {bad} outside a space of {n_labels}",
                cfg.kind
            )));
        }
    }
    let classes: Vec<BTreeSet<u32>> = labelsets.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let class_of: BTreeMap<&BTreeSet<u32>, usize> = classes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let y: Vec<usize> = labelsets.iter().map(|s| class_of[s]).collect();
    let x = features
        .iter()
        .map(|f| input_row(&inputs, f))
        .collect::<Result<Vec<_>>>()?;
    let forest = RandomForest::fit(&x, &y, classes.len(), cfg.forest)?;
    Ok(LabelPowerset {
        kind: cfg.kind,
        n_labels,
        inputs,
        classes,
        forest,
    })
}

/// Per-label confidence: the summed vote mass of every atomic class that
/// contains the label.
pub fn labelpowerset_predict(model: &LabelPowerset, query: &FusedFeature) -> Result<LabelScores> {
    let votes = model.forest.predict_proba(&input_row(&model.inputs, query)?)?;
    Ok(model.scores_from_votes(&votes))
}

impl LabelPowerset {
    pub(crate) fn scores_from_votes(&self, votes: &[f64]) -> LabelScores {
        let mut scores = vec![0.0; self.n_labels];
        for (class, &mass) in self.classes.iter().zip(votes) {
            for &l in class {
                scores[l as usize] += mass;
            }
        }
        for s in &mut scores {
            *s = s.min(1.0);
        }
        LabelScores {
            kind: self.kind,
            scores,
        }
    }

    /// The labelset of the most voted atomic class.
    pub fn predict_labelset(&self, query: &FusedFeature) -> Result<&BTreeSet<u32>> {
        let votes = self.forest.predict_proba(&input_row(&self.inputs, query)?)?;
        Ok(&self.classes[argmax(&votes)])
    }

    pub fn kind(&self) -> CharacteristicKind {
        self.kind
    }

    pub fn classes(&self) -> &[BTreeSet<u32>] {
        &self.classes
    }

    pub fn inputs(&self) -> &[(CharacteristicKind, usize)] {
        &self.inputs
    }

    pub fn tree_count(&self) -> usize {
        self.forest.tree_count()
    }

    pub fn forest(&self) -> &RandomForest {
        &self.forest
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let p = &self.forest.params;
        let mut b = Vec::new();
        b.extend_from_slice(MODEL_MAGIC);
        b.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        b.extend_from_slice(&p.seed.to_le_bytes());
        put_u32(&mut b, p.trees);
        put_u32(&mut b, p.max_features.unwrap_or(0));
        put_u32(&mut b, p.min_samples_leaf);
        put_u32(&mut b, p.max_depth.unwrap_or(0));
        b.push(p.bootstrap as u8);
        b.push(self.kind.code());
        put_u32(&mut b, self.n_labels);
        b.push(self.inputs.len() as u8);
        for &(k, d) in &self.inputs {
            b.push(k.code());
            put_u32(&mut b, d);
        }
        put_u32(&mut b, self.classes.len());
        for c in &self.classes {
            put_u32(&mut b, c.len());
            for &l in c {
                b.extend_from_slice(&l.to_le_bytes());
            }
        }
        for tree in &self.forest.trees {
            put_u32(&mut b, tree.nodes.len());
            for node in &tree.nodes {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        b.push(0);
                        b.extend_from_slice(&feature.to_le_bytes());
                        b.extend_from_slice(&threshold.to_le_bytes());
                        b.extend_from_slice(&left.to_le_bytes());
                        b.extend_from_slice(&right.to_le_bytes());
                    }
                    Node::Leaf(dist) => {
                        b.push(1);
                        for v in dist {
                            b.extend_from_slice(&v.to_le_bytes());
                        }
                    }
                }
            }
        }
        out.write_all(&b)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut r = Cursor { bytes: &bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::ModelFile("bad magic".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFile(format!("unsupported version {version}")));
        }
        let seed = r.u64()?;
        let trees = r.u32()? as usize;
        let max_features = Some(r.u32()? as usize).filter(|&v| v > 0);
        let min_samples_leaf = r.u32()? as usize;
        let max_depth = Some(r.u32()? as usize).filter(|&v| v > 0);
        let bootstrap = r.u8()? != 0;
        let kind = r.kind()?;
        let n_labels = r.u32()? as usize;
        let n_inputs = r.u8()? as usize;
        let mut inputs = Vec::with_capacity(n_inputs);
        for _ in 0..n_inputs {
            inputs.push((r.kind()?, r.u32()? as usize));
        }
        let dim = inputs.iter().map(|(_, d)| d).sum();
        let n_classes = r.u32()? as usize;
        let mut classes = Vec::with_capacity(n_classes.min(1 << 16));
        for _ in 0..n_classes {
            let size = r.u32()? as usize;
            let mut set = BTreeSet::new();
            for _ in 0..size {
                let l = r.u32()?;
                if l as usize >= n_labels {
                    return Err(Error::ModelFile(format!("label {l} outside a space of {n_labels}")));
                }
                set.insert(l);
            }
            classes.push(set);
        }
        let mut forest_trees = Vec::with_capacity(trees.min(1 << 16));
        for _ in 0..trees {
            let n_nodes = r.u32()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
            for _ in 0..n_nodes {
                nodes.push(match r.u8()? {
                    0 => {
                        let feature = r.u32()?;
                        let threshold = r.f64()?;
                        let (left, right) = (r.u32()?, r.u32()?);
                        if feature as usize >= dim || left as usize >= n_nodes || right as usize >= n_nodes {
                            return Err(Error::ModelFile("split node out of range".into()));
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        }
                    }
                    1 => Node::Leaf((0..n_classes).map(|_| r.f64()).collect::<Result<_>>()?),
                    tag => return Err(Error::ModelFile(format!("bad node tag {tag}"))),
                });
            }
            if nodes.is_empty() {
                return Err(Error::ModelFile("empty tree".into()));
            }
            forest_trees.push(DecisionTree { nodes });
        }
        if r.pos != bytes.len() {
            return Err(Error::ModelFile("trailing bytes".into()));
        }
        Ok(Self {
            kind,
            n_labels,
            inputs,
            classes,
            forest: RandomForest {
                params: ForestParams {
                    trees,
                    max_features,
                    min_samples_leaf,
                    max_depth,
                    bootstrap,
                    seed,
                },
                n_classes,
                dim,
                trees: forest_trees,
            },
        })
    }
}

fn put_u32(b: &mut Vec<u8>, v: usize) {
    b.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::ModelFile(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn kind(&mut self) -> Result<CharacteristicKind> {
        let code = self.u8()?;
        CharacteristicKind::from_code(code).ok_or_else(|| Error::ModelFile(format!("unknown kind tag {code}")))
    }
}
