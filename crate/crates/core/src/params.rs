//! Named trainable tensors with gradients and ADADELTA accumulators, plus the
//! `LRMMCKPT` checkpoint container.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LRMMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const ACC_G_SUFFIX: &str = "#adadelta_g";
const ACC_X_SUFFIX: &str = "#adadelta_x";

/// Index of a parameter inside its store. Stable for the store's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub acc_g: Tensor,
    pub acc_x: Tensor,
}

impl Parameter {
    fn new(name: String, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            name,
            grad: Tensor::zeros(&shape),
            acc_g: Tensor::zeros(&shape),
            acc_x: Tensor::zeros(&shape),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, ParamId>,
    pub rng_seed: u64,
}

impl ParameterStore {
    pub fn new(rng_seed: u64) -> Self {
        ParameterStore {
            params: Vec::new(),
            by_name: BTreeMap::new(),
            rng_seed,
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::invalid(format!("duplicate parameter name `{name}`")));
        }
        if name.contains('#') {
            return Err(Error::invalid(format!("`#` is reserved in parameter names: `{name}`")));
        }
        let id = ParamId(self.params.len());
        self.params.push(Parameter::new(name.to_string(), value));
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingEntity(format!("parameter `{name}`")))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Parameters in name order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.by_name.values().map(|&id| (id, &self.params[id.0]))
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.by_name.values().copied().collect()
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.grad.fill(0.0));
    }

    /// Adds `scale * grad` into the stored gradient of `id`.
    pub fn accumulate_grad(&mut self, id: ParamId, grad: &[f64], scale: f64) {
        let g = self.params[id.0].grad.values_mut();
        debug_assert_eq!(g.len(), grad.len());
        g.iter_mut().zip(grad).for_each(|(a, b)| *a += scale * b);
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for (_, p) in self.iter() {
            write_entry(&mut w, &p.name, &p.value)?;
            write_entry(&mut w, &format!("{}{ACC_G_SUFFIX}", p.name), &p.acc_g)?;
            write_entry(&mut w, &format!("{}{ACC_X_SUFFIX}", p.name), &p.acc_x)?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_checkpoint(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint(bytes: &[u8], rng_seed: u64) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(8)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut values = BTreeMap::new();
        let mut accs: BTreeMap<String, Tensor> = BTreeMap::new();
        while cur.pos < bytes.len() {
            let name_len = cur.u32()? as usize;
            let name = std::str::from_utf8(cur.take(name_len)?)
                .map_err(|_| Error::Format(format!("non-UTF-8 name at byte {}", cur.pos)))?
                .to_string();
            let rank = cur.u32()? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(cur.u32()? as usize);
            }
            let n: usize = dims.iter().product();
            let mut vals = Vec::with_capacity(n);
            for _ in 0..n {
                vals.push(f64::from_le_bytes(cur.take(8)?.try_into().unwrap()));
            }
            let t = Tensor::from_vec(&dims, vals).map_err(|e| Error::Format(e.to_string()))?;
            if name.contains('#') {
                accs.insert(name, t);
            } else {
                values.insert(name, t);
            }
        }
        let mut store = ParameterStore::new(rng_seed);
        for (name, value) in values {
            let id = store.insert(&name, value)?;
            let p = store.get_mut(id);
            for (suffix, slot) in [(ACC_G_SUFFIX, &mut p.acc_g), (ACC_X_SUFFIX, &mut p.acc_x)] {
                if let Some(acc) = accs.remove(&format!("{name}{suffix}")) {
                    if acc.shape() != slot.shape() {
                        return Err(Error::Format(format!("accumulator shape mismatch for `{name}`")));
                    }
                    *slot = acc;
                }
            }
        }
        if let Some(orphan) = accs.keys().next() {
            return Err(Error::Format(format!("accumulator `{orphan}` has no parameter")));
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>, rng_seed: u64) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(&bytes, rng_seed)
    }
}

fn write_entry<W: Write>(w: &mut W, name: &str, t: &Tensor) -> std::io::Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in t.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Little-endian reader that reports the offset of a short read.
pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated input at byte offset {} (needed {n} more bytes)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
