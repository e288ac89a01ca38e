//! EMB1: id-aligned fixed-dimension embeddings on disk.
//!
//! Layout, all integers little-endian, no padding:
//!
//! ```text
//! 0..4    b"EMB1"
//! 4..6    version  u16 (= 1)
//! 6..10   dim      u32
//! 10..14  count    u32
//! then `count` records:
//!         id_len   u16
//!         id       id_len bytes of UTF-8
//!         values   dim x f32
//! ```

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::corpus::{Corpus, LabelVector};
use crate::{Error, Matrix, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

/// Features, labels and ids for the same posts, row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub x: Matrix,
    pub y: Vec<LabelVector>,
    pub ids: Vec<String>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            records: Vec::new(),
        }
    }

    /// Builds a store from a matrix, narrowing values to `f32`.
    pub fn from_matrix(ids: &[String], x: &Matrix) -> Result<Self> {
        if ids.len() != x.rows() {
            return Err(Error::Shape(format!(
                "{} ids for {} rows",
                ids.len(),
                x.rows()
            )));
        }
        let records = ids
            .iter()
            .zip(x.iter_rows())
            .map(|(id, row)| EmbeddingRecord {
                id: id.clone(),
                vector: row.iter().map(|&v| v as f32).collect(),
            })
            .collect();
        let store = EmbeddingStore {
            dim: x.cols(),
            records,
        };
        store.validate()?;
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > u32::MAX as usize {
            return Err(Error::Validation(format!("invalid dim {}", self.dim)));
        }
        if self.records.len() > u32::MAX as usize {
            return Err(Error::Validation("too many records".into()));
        }
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if r.id.len() > u16::MAX as usize {
                return Err(Error::Validation(format!(
                    "id too long: {} bytes",
                    r.id.len()
                )));
            }
            if r.vector.len() != self.dim {
                return Err(Error::Validation(format!(
                    "record {:?} has {} values, expected {}",
                    r.id,
                    r.vector.len(),
                    self.dim
                )));
            }
            if let Some(v) = r.vector.iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "record {:?} contains non-finite value {v}",
                    r.id
                )));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate id {:?}", r.id)));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut out = Vec::with_capacity(HEADER_LEN + self.records.len() * (2 + 16 + 4 * self.dim));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.id.len() as u16).to_le_bytes());
            out.extend_from_slice(r.id.as_bytes());
            for v in &r.vector {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad magic {:?}", String::from_utf8_lossy(magic)),
            });
        }
        let version = cur.u16("version")?;
        if version != VERSION {
            return Err(Error::Format {
                offset: 4,
                message: format!("unsupported version {version}"),
            });
        }
        let dim = cur.u32("dim")? as usize;
        if dim == 0 {
            return Err(Error::Format {
                offset: 6,
                message: "dim must be positive".into(),
            });
        }
        let count = cur.u32("count")? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 20));
        let mut seen = HashSet::new();
        for i in 0..count {
            let at = cur.pos;
            let id_len = cur.u16("id length")? as usize;
            let id_bytes = cur.take(id_len, "id")?;
            let id = std::str::from_utf8(id_bytes)
                .map_err(|_| Error::Format {
                    offset: at + 2,
                    message: format!("record {i}: id is not UTF-8"),
                })?
                .to_string();
            let raw = cur.take(4 * dim, "vector")?;
            let vector: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if let Some(k) = vector.iter().position(|v| !v.is_finite()) {
                return Err(Error::Format {
                    offset: at + 2 + id_len + 4 * k,
                    message: format!("record {id:?}: non-finite value"),
                });
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Integrity(format!("duplicate id {id:?}")));
            }
            records.push(EmbeddingRecord { id, vector });
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format {
                offset: cur.pos,
                message: format!("{} trailing bytes", bytes.len() - cur.pos),
            });
        }
        Ok(EmbeddingStore { dim, records })
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.records
            .iter()
            .find(|r| r.id == id)
            .map(|r| r.vector.as_slice())
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    /// All vectors widened to `f64`, in store order.
    pub fn to_matrix(&self) -> Matrix {
        let data = self
            .records
            .iter()
            .flat_map(|r| r.vector.iter().map(|&v| f64::from(v)))
            .collect();
        Matrix::from_vec(self.records.len(), self.dim, data).expect("validated store")
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format {
                offset: self.pos,
                message: format!(
                    "truncated file: need {n} bytes for {what}, {} available",
                    self.bytes.len() - self.pos
                ),
            }),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn write_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = store.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_bytes(&bytes)
}

/// Pairs each corpus post with its vector, in corpus order. Store records
/// not referenced by the corpus are ignored.
pub fn align(
    corpus: &Corpus,
    store: &EmbeddingStore,
    expected_dim: Option<usize>,
) -> Result<AlignedDataset> {
    if let Some(expected) = expected_dim {
        if store.dim != expected {
            return Err(Error::Dimension {
                expected,
                found: store.dim,
            });
        }
    }
    if corpus.is_empty() {
        return Err(Error::Validation("cannot align an empty corpus".into()));
    }
    let index: HashMap<&str, &[f32]> = store
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.vector.as_slice()))
        .collect();
    let missing: Vec<&str> = corpus.ids().filter(|id| !index.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(Error::Alignment {
            shown: missing.iter().take(10).map(|s| s.to_string()).collect(),
            total: missing.len(),
        });
    }
    let mut data = Vec::with_capacity(corpus.len() * store.dim);
    for p in &corpus.posts {
        data.extend(index[p.id.as_str()].iter().map(|&v| f64::from(v)));
    }
    Ok(AlignedDataset {
        x: Matrix::from_vec(corpus.len(), store.dim, data)?,
        y: corpus.labels(),
        ids: corpus.ids().map(String::from).collect(),
    })
}

impl AlignedDataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Rows whose gold label is hostile.
    pub fn hostile_only(&self) -> AlignedDataset {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.y[i].is_hostile())
            .collect();
        self.select(&keep)
    }

    pub fn select(&self, rows: &[usize]) -> AlignedDataset {
        AlignedDataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }

    pub fn with_features(&self, x: Matrix) -> Result<AlignedDataset> {
        if x.rows() != self.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} posts",
                x.rows(),
                self.len()
            )));
        }
        Ok(AlignedDataset {
            x,
            y: self.y.clone(),
            ids: self.ids.clone(),
        })
    }
}
