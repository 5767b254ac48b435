//! The NDC1 container: a small, auditable binary format for datasets,
//! recordings and parameter checkpoints.
//!
//! ```text
//! file   := "NDC1" | version:u16 | block_count:u32 | block*
//! block  := kind:u8 | body_len:u64 | body | crc32:u32      crc over kind, body_len, body
//! kind 1 := pair_count:u32 | (key_len:u32 key value_len:u32 value)*     UTF-8 metadata
//! kind 2 := name_len:u16 name | rank:u8 | dims:u64*rank | dtype:u8 | elements
//! dtype  := 1 f32 | 2 u32
//! ```
//!
//! All integers and elements are little-endian. Blocks of unknown kind are
//! checksummed, kept verbatim and written back unchanged.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"NDC1";
pub const VERSION: u16 = 1;

const KIND_META: u8 = 1;
const KIND_TENSOR: u8 = 2;
const DTYPE_F32: u8 = 1;
const DTYPE_U32: u8 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("not an NDC1 file (bad magic)")]
    BadMagic,
    #[error("unsupported NDC1 version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated input: needed {needed} bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("checksum mismatch in block {block}: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { block: usize, stored: u32, computed: u32 },
    #[error("malformed block {block}: {reason}")]
    Malformed { block: usize, reason: String },
}

impl FormatError {
    /// Stable numeric code per failure class.
    pub fn code(&self) -> u8 {
        match self {
            FormatError::BadMagic => 10,
            FormatError::UnsupportedVersion(_) => 11,
            FormatError::Truncated { .. } => 12,
            FormatError::Checksum { .. } => 13,
            FormatError::Malformed { .. } => 14,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U32(Vec<u32>),
}

impl TensorData {
    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U32(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<TensorBlock>,
    /// Blocks of kinds this reader does not interpret, kept for round trips.
    pub opaque: Vec<(u8, Vec<u8>)>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.insert(key.into(), value.to_string());
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Data(format!("missing metadata key {key:?}")))
    }

    pub fn meta_parse<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| Error::Data(format!("metadata {key:?} has unparsable value {raw:?}")))
    }

    fn upsert(&mut self, block: TensorBlock) {
        match self.tensors.iter_mut().find(|b| b.name == block.name) {
            Some(slot) => *slot = block,
            None => self.tensors.push(block),
        }
    }

    pub fn put_f32(&mut self, name: impl Into<String>, t: &Tensor<f32>) {
        self.upsert(TensorBlock {
            name: name.into(),
            shape: t.shape().to_vec(),
            data: TensorData::F32(t.data().to_vec()),
        });
    }

    pub fn put_u32(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<u32>) {
        self.upsert(TensorBlock {
            name: name.into(),
            shape: shape.to_vec(),
            data: TensorData::U32(data),
        });
    }

    pub fn block(&self, name: &str) -> Result<&TensorBlock> {
        self.tensors
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Data(format!("missing tensor block {name:?}")))
    }

    pub fn get_f32(&self, name: &str) -> Result<Tensor<f32>> {
        let b = self.block(name)?;
        match &b.data {
            TensorData::F32(v) => Tensor::from_vec(&b.shape, v.clone()),
            TensorData::U32(_) => Err(Error::Data(format!("tensor {name:?} is u32, expected f32"))),
        }
    }

    pub fn get_u32(&self, name: &str) -> Result<(Vec<usize>, Vec<u32>)> {
        let b = self.block(name)?;
        match &b.data {
            TensorData::U32(v) => Ok((b.shape.clone(), v.clone())),
            TensorData::F32(_) => Err(Error::Data(format!("tensor {name:?} is f32, expected u32"))),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let count = 1 + self.tensors.len() + self.opaque.len();
        out.extend_from_slice(&(count as u32).to_le_bytes());

        let mut body = Vec::new();
        body.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            body.extend_from_slice(&(k.len() as u32).to_le_bytes());
            body.extend_from_slice(k.as_bytes());
            body.extend_from_slice(&(v.len() as u32).to_le_bytes());
            body.extend_from_slice(v.as_bytes());
        }
        write_block(&mut out, KIND_META, &body);

        for t in &self.tensors {
            body.clear();
            body.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            body.extend_from_slice(t.name.as_bytes());
            body.push(t.shape.len() as u8);
            for &d in &t.shape {
                body.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match &t.data {
                TensorData::F32(v) => {
                    body.push(DTYPE_F32);
                    v.iter().for_each(|x| body.extend_from_slice(&x.to_le_bytes()));
                }
                TensorData::U32(v) => {
                    body.push(DTYPE_U32);
                    v.iter().for_each(|x| body.extend_from_slice(&x.to_le_bytes()));
                }
            }
            write_block(&mut out, KIND_TENSOR, &body);
        }
        for (kind, raw) in &self.opaque {
            write_block(&mut out, *kind, raw);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let count = r.u32()? as usize;
        let mut c = Container::new();
        for block in 0..count {
            let start = r.pos;
            let kind = r.u8()?;
            let len = r.u64()?;
            let len = usize::try_from(len).map_err(|_| FormatError::Truncated {
                offset: r.pos,
                needed: usize::MAX,
            })?;
            let body = r.take(len)?;
            let covered = &bytes[start..r.pos];
            let stored = r.u32()?;
            let computed = crc32fast::hash(covered);
            if stored != computed {
                return Err(FormatError::Checksum {
                    block,
                    stored,
                    computed,
                });
            }
            match kind {
                KIND_META => decode_meta(body, block, &mut c.meta)?,
                KIND_TENSOR => {
                    let t = decode_tensor(body, block)?;
                    if c.tensors.iter().any(|b| b.name == t.name) {
                        return Err(FormatError::Malformed {
                            block,
                            reason: format!("duplicate tensor name {:?}", t.name),
                        });
                    }
                    c.tensors.push(t);
                }
                other => c.opaque.push((other, body.to_vec())),
            }
        }
        if r.pos != bytes.len() {
            return Err(FormatError::Malformed {
                block: count,
                reason: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::decode(&bytes)?)
    }
}

fn write_block(out: &mut Vec<u8>, kind: u8, body: &[u8]) {
    let start = out.len();
    out.push(kind);
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(body);
    let crc = crc32fast::hash(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
            }),
        }
    }

    fn u8(&mut self) -> std::result::Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> std::result::Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn malformed(block: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        block,
        reason: reason.into(),
    }
}

/// Inside a checksummed body, running short means the block lied about its
/// own layout, which is a malformation rather than truncation of the file.
fn inner<T>(block: usize, r: std::result::Result<T, FormatError>) -> std::result::Result<T, FormatError> {
    r.map_err(|_| malformed(block, "block body shorter than its declared layout"))
}

fn utf8(block: usize, raw: &[u8]) -> std::result::Result<String, FormatError> {
    String::from_utf8(raw.to_vec()).map_err(|_| malformed(block, "invalid UTF-8"))
}

fn decode_meta(
    body: &[u8],
    block: usize,
    meta: &mut BTreeMap<String, String>,
) -> std::result::Result<(), FormatError> {
    let mut r = Reader { bytes: body, pos: 0 };
    let n = inner(block, r.u32())?;
    for _ in 0..n {
        let kl = inner(block, r.u32())? as usize;
        let key = utf8(block, inner(block, r.take(kl))?)?;
        let vl = inner(block, r.u32())? as usize;
        let value = utf8(block, inner(block, r.take(vl))?)?;
        meta.insert(key, value);
    }
    if r.pos != body.len() {
        return Err(malformed(block, "unused bytes after metadata pairs"));
    }
    Ok(())
}

fn decode_tensor(body: &[u8], block: usize) -> std::result::Result<TensorBlock, FormatError> {
    let mut r = Reader { bytes: body, pos: 0 };
    let nl = inner(block, r.u16())? as usize;
    let name = utf8(block, inner(block, r.take(nl))?)?;
    let rank = inner(block, r.u8())? as usize;
    let mut shape = Vec::with_capacity(rank);
    let mut count: usize = 1;
    for _ in 0..rank {
        let d = usize::try_from(inner(block, r.u64())?).map_err(|_| malformed(block, "dimension overflows"))?;
        count = count
            .checked_mul(d)
            .ok_or_else(|| malformed(block, "element count overflows"))?;
        shape.push(d);
    }
    let dtype = inner(block, r.u8())?;
    let remaining = body.len() - r.pos;
    if count.checked_mul(4) != Some(remaining) {
        return Err(malformed(
            block,
            format!("tensor {name:?} declares {count} elements but carries {remaining} bytes"),
        ));
    }
    let raw = &body[r.pos..];
    let words = raw.chunks_exact(4).map(|c| <[u8; 4]>::try_from(c).unwrap());
    let data = match dtype {
        DTYPE_F32 => TensorData::F32(words.map(f32::from_le_bytes).collect()),
        DTYPE_U32 => TensorData::U32(words.map(u32::from_le_bytes).collect()),
        other => return Err(malformed(block, format!("unknown dtype tag {other}"))),
    };
    debug_assert_eq!(data.len(), count);
    Ok(TensorBlock { name, shape, data })
}
