//! `LRMMFEAT` binary container for per-item image feature vectors.
//!
//! Layout (little-endian): magic `LRMMFEAT`, `u32` version (1), `u32` record
//! count, `u32` dim, then per record a `u32` id length, the UTF-8 id and `dim`
//! `f32` values.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::Cursor;

pub const FEATURE_MAGIC: &[u8; 8] = b"LRMMFEAT";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub dim: usize,
    pub vectors: BTreeMap<String, Arc<Vec<f64>>>,
}

impl FeatureTable {
    pub fn new(dim: usize) -> Self {
        FeatureTable {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, item: &str) -> Option<&Arc<Vec<f64>>> {
        self.vectors.get(item)
    }

    pub fn insert(&mut self, item: &str, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::invalid(format!(
                "feature for `{item}` has dim {}, table dim is {}",
                v.len(),
                self.dim
            )));
        }
        self.vectors.insert(item.to_string(), Arc::new(v));
        Ok(())
    }

    /// Records are written in id order. Values are narrowed to `f32`.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&FEATURE_VERSION.to_le_bytes())?;
        w.write_all(&(self.vectors.len() as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for (id, v) in &self.vectors {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            for &x in v.iter() {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != FEATURE_MAGIC {
            return Err(Error::Format("bad LRMMFEAT magic".into()));
        }
        let version = cur.u32()?;
        if version != FEATURE_VERSION {
            return Err(Error::Format(format!("unsupported LRMMFEAT version {version}")));
        }
        let count = cur.u32()? as usize;
        let dim = cur.u32()? as usize;
        let mut table = FeatureTable::new(dim);
        for _ in 0..count {
            let id_len = cur.u32()? as usize;
            let at = cur.pos;
            let id = std::str::from_utf8(cur.take(id_len)?)
                .map_err(|_| Error::Format(format!("non-UTF-8 item id at byte offset {at}")))?
                .to_string();
            let raw = cur.take(4 * dim)?;
            let v = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            table.vectors.insert(id, Arc::new(v));
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after {count} records at byte offset {}",
                bytes.len() - cur.pos,
                cur.pos
            )));
        }
        Ok(table)
    }
}

pub fn load_image_features(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureTable::parse(&bytes)
}
