//! Binary tensor archive used for model checkpoints.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "NEDM" | version | count | count × (name_len | name utf-8 | rank | dims[rank] | f32 payload)
//! ```
//!
//! Model tensors come first, optional training-state records next, and the
//! normalization statistics last under [`NORM_MEAN`] / [`NORM_STD`].

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::{ParameterStore, Tensor};
use crate::error::{Error, Result};
use crate::networks::{ManipulatorParams, NetConfig, Normalization};
use crate::sequence::{EXPR_DIM, STYLE_DIM};

pub const MAGIC: &[u8; 4] = b"NEDM";
pub const VERSION: u32 = 1;
pub const NORM_MEAN: &str = "__norm.mean";
pub const NORM_STD: &str = "__norm.std";
pub const WINDOW: &str = "__meta.window";

pub type Record = (String, Tensor);

pub fn encode(records: &[Record]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (name, t) in records {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.dims().len() as u32).to_le_bytes());
        for &d in t.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Record>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let count = c.u32()? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = c.u32()? as usize;
        let dims = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n.ok_or_else(|| Error::Format(format!("{name}: dims overflow")))?;
        let payload = c.take(n.checked_mul(4).ok_or_else(|| Error::Format(format!("{name}: too large")))?)?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let t = Tensor::new(dims, data).map_err(|e| Error::Format(format!("{name}: {e}")))?;
        records.push((name, t));
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(records)
}

pub fn write_file(path: &Path, records: &[Record]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(records))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<Record>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Lossless `u64` encoding as four 16-bit chunks, each exactly representable in `f32`.
pub fn u64_tensor(v: u64) -> Tensor {
    let data = (0..4).map(|i| ((v >> (16 * i)) & 0xffff) as f32).collect();
    Tensor::new(vec![4], data).unwrap()
}

pub fn tensor_u64(t: &Tensor) -> Result<u64> {
    if t.len() != 4 || t.data().iter().any(|&c| !(0.0..65536.0).contains(&c) || c.fract() != 0.0) {
        return Err(Error::Format("malformed integer record".into()));
    }
    Ok(t.data().iter().enumerate().fold(0u64, |acc, (i, &c)| acc | ((c as u64) << (16 * i))))
}

pub fn find<'a>(records: &'a [Record], name: &str) -> Result<&'a Tensor> {
    records
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
}

fn load_store(store: &mut ParameterStore, records: &[Record]) -> Result<()> {
    for i in 0..store.len() {
        let name = store.entries()[i].name.clone();
        let t = find(records, &name)?;
        if t.dims() != store.value(i).dims() {
            return Err(Error::Format(format!(
                "{name}: dims {:?}, expected {:?}",
                t.dims(),
                store.value(i).dims()
            )));
        }
        *store.value_mut(i) = t.clone();
    }
    Ok(())
}

fn dim(records: &[Record], name: &str, axis: usize) -> Result<usize> {
    find(records, name)?
        .dims()
        .get(axis)
        .copied()
        .ok_or_else(|| Error::Format(format!("{name}: rank too small")))
}

impl ManipulatorParams {
    /// Parameter tensors followed by nothing else; see [`Self::to_records`].
    pub fn param_records(&self) -> Vec<Record> {
        self.stores()
            .iter()
            .flat_map(|s| s.entries().iter().map(|e| (e.name.clone(), e.value.clone())))
            .collect()
    }

    pub fn norm_records(&self) -> Vec<Record> {
        vec![
            (WINDOW.into(), u64_tensor(self.window as u64)),
            (NORM_MEAN.into(), Tensor::new(vec![EXPR_DIM], self.norm.mean.clone()).unwrap()),
            (NORM_STD.into(), Tensor::new(vec![EXPR_DIM], self.norm.std.clone()).unwrap()),
        ]
    }

    /// Full model archive: parameters then normalization statistics.
    pub fn to_records(&self) -> Vec<Record> {
        let mut r = self.param_records();
        r.extend(self.norm_records());
        r
    }

    /// Rebuilds parameters from an archive, inferring hidden sizes from the tensor dims.
    pub fn from_records(records: &[Record]) -> Result<Self> {
        let hidden_g = dim(records, "translator.lstm.weight", 1)? / 4;
        let hidden_e = dim(records, "style_encoder.lstm.weight", 1)? / 4;
        let hidden_d = dim(records, "discriminator.lstm.weight", 1)? / 4;
        let mapping_hidden = dim(records, "mapping.fc1.weight", 1)?;
        let config = NetConfig {
            hidden_g,
            hidden_e,
            hidden_d,
            mapping_hidden,
        };
        let mut params = ManipulatorParams::init(config, 0).map_err(|e| Error::Format(e.to_string()))?;
        for store in params.stores_mut() {
            load_store(store, records)?;
        }
        if dim(records, "style_encoder.head.weight", 1)? != STYLE_DIM {
            return Err(Error::Format("style head width mismatch".into()));
        }
        params.norm = Normalization {
            mean: find(records, NORM_MEAN)?.data().to_vec(),
            std: find(records, NORM_STD)?.data().to_vec(),
        };
        params.norm.validate().map_err(|e| Error::Format(e.to_string()))?;
        if let Ok(t) = find(records, WINDOW) {
            params.window = tensor_u64(t)? as usize;
            if params.window < 2 {
                return Err(Error::Format("window length must be at least 2".into()));
            }
        }
        if !params.is_finite() {
            return Err(Error::Format("non-finite parameter values".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_records())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_records(&read_file(path)?)
    }
}
