//! `NCF1` embedding store: externally computed neural codes for one
//! characteristic.
//!
//! ```text
//! magic      4 bytes  "NCF1"
//! kind       u8       CharacteristicKind::code()
//! dim        u32 LE
//! count      u64 LE
//! normalized u8       0 or 1
//! count x { logo_id u64 LE, dim x f32 LE }
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{l2_normalize, FeatureBlock};
use crate::error::{Error, Result};
use crate::taxonomy::CharacteristicKind;

pub const NCF_MAGIC: &[u8; 4] = b"NCF1";
const HEADER_LEN: usize = 4 + 1 + 4 + 8 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingHeader {
    pub kind: CharacteristicKind,
    pub dim: u32,
    pub count: u64,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub header: EmbeddingHeader,
    pub records: Vec<(u64, Vec<f32>)>,
}

/// Writes blocks of one kind. Values are narrowed to f32.
pub fn write_embeddings<'a, W: Write>(
    mut out: W,
    kind: CharacteristicKind,
    normalized: bool,
    records: impl IntoIterator<Item = (u64, &'a [f64])>,
) -> Result<()> {
    let records: Vec<(u64, &[f64])> = records.into_iter().collect();
    let dim = records.first().map_or(0, |(_, v)| v.len());
    if dim == 0 {
        return Err(Error::EmbeddingStore("cannot write an empty or zero-dimensional store".into()));
    }
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(NCF_MAGIC);
    header.push(kind.code());
    header.extend_from_slice(&(dim as u32).to_le_bytes());
    header.extend_from_slice(&(records.len() as u64).to_le_bytes());
    header.push(normalized as u8);
    out.write_all(&header)?;
    let mut seen = HashSet::new();
    let mut buf = Vec::with_capacity(8 + dim * 4);
    for (id, values) in records {
        if values.len() != dim {
            return Err(Error::BlockDimension {
                kind,
                expected: dim,
                actual: values.len(),
            });
        }
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id));
        }
        buf.clear();
        buf.extend_from_slice(&id.to_le_bytes());
        for &v in values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a whole store, checking the header, duplicate ids and length.
pub fn read_embeddings<R: Read>(mut input: R) -> Result<EmbeddingFile> {
    let mut header = [0u8; HEADER_LEN];
    read_fully(&mut input, &mut header, "header")?;
    if &header[..4] != NCF_MAGIC {
        return Err(Error::EmbeddingStore(format!("bad magic {:?}", &header[..4])));
    }
    let kind = CharacteristicKind::from_code(header[4])
        .ok_or_else(|| Error::EmbeddingStore(format!("unknown kind tag {}", header[4])))?;
    let dim = u32::from_le_bytes(header[5..9].try_into().unwrap());
    let count = u64::from_le_bytes(header[9..17].try_into().unwrap());
    let normalized = match header[17] {
        0 => false,
        1 => true,
        other => return Err(Error::EmbeddingStore(format!("bad normalized flag {other}"))),
    };
    if dim == 0 {
        return Err(Error::EmbeddingStore("header declares dim 0".into()));
    }

    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut buf = vec![0u8; 8 + dim as usize * 4];
    for i in 0..count {
        read_fully(&mut input, &mut buf, &format!("record {i} of {count}"))?;
        let id = u64::from_le_bytes(buf[..8].try_into().unwrap());
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id));
        }
        let values = buf[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push((id, values));
    }
    let mut extra = [0u8; 1];
    if input.read(&mut extra)? != 0 {
        return Err(Error::EmbeddingStore(format!(
            "trailing bytes after {count} records"
        )));
    }
    Ok(EmbeddingFile {
        header: EmbeddingHeader {
            kind,
            dim,
            count,
            normalized,
        },
        records,
    })
}

fn read_fully<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = input.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(Error::Truncated(format!(
                "{what}: got {filled} of {} bytes",
                buf.len()
            )));
        }
        filled += n;
    }
    Ok(())
}

impl EmbeddingFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_embeddings(BufReader::new(File::open(path)?))
    }

    /// Converts to f64 blocks, l2-normalizing unless the header says the
    /// vectors already are.
    pub fn into_blocks(self) -> BTreeMap<u64, FeatureBlock> {
        let kind = self.header.kind;
        let normalized = self.header.normalized;
        self.records
            .into_iter()
            .map(|(id, v)| {
                let block = FeatureBlock::new(kind, v.into_iter().map(f64::from).collect());
                (id, if normalized { block } else { l2_normalize(&block) })
            })
            .collect()
    }
}

/// Loads a store as logo id to feature block.
pub fn import_neural_codes(path: impl AsRef<Path>) -> Result<(EmbeddingHeader, BTreeMap<u64, FeatureBlock>)> {
    let file = EmbeddingFile::load(path)?;
    let header = file.header;
    Ok((header, file.into_blocks()))
}

/// Saves blocks that all share one kind.
pub fn save_blocks<'a>(
    path: impl AsRef<Path>,
    kind: CharacteristicKind,
    normalized: bool,
    blocks: impl IntoIterator<Item = (u64, &'a FeatureBlock)>,
) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    let mut rows = Vec::new();
    for (id, b) in blocks {
        if b.kind != kind {
            return Err(Error::Schema(format!("{} block in a {kind} store", b.kind)));
        }
        rows.push((id, b.values.as_slice()));
    }
    write_embeddings(out, kind, normalized, rows)
}
