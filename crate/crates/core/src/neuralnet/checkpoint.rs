//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "ORCHCKPT"
//! version          u32      currently 1
//! dtype            u8 length + ASCII ("f32" | "f64")
//! input_dim        u32
//! n_agents         u32
//! n_hidden         u32, followed by n_hidden × u32 widths
//! dropout_rate     f64
//! confidence_head  u8 (0 | 1)
//! n_tensors        u32
//! per tensor       u8 rank, rank × u32 dims, then prod(dims) × f64 values
//! ```
//!
//! Tensors appear in [`Parameters::tensors`] order. Values are always stored
//! as f64, which is exact for both supported scalar types.

use super::{Mlp, NetworkConfig, Parameters};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ORCHCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn serialize<T: Scalar>(model: &Mlp<T>) -> Vec<u8> {
    let config = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(T::DTYPE.len() as u8);
    out.extend_from_slice(T::DTYPE.as_bytes());
    put_u32(&mut out, config.input_dim);
    put_u32(&mut out, config.n_agents);
    put_u32(&mut out, config.hidden_dims.len());
    for &h in &config.hidden_dims {
        put_u32(&mut out, h);
    }
    out.extend_from_slice(&config.dropout_rate.to_le_bytes());
    out.push(config.confidence_head as u8);
    let params = model.params();
    let shapes = params.shapes();
    put_u32(&mut out, shapes.len());
    for (shape, data) in shapes.iter().zip(params.tensors()) {
        out.push(shape.len() as u8);
        for &d in shape {
            put_u32(&mut out, d);
        }
        for &v in data {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

pub fn deserialize<T: Scalar>(bytes: &[u8]) -> Result<Mlp<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let dtype_len = r.u8()? as usize;
    let dtype = r.take(dtype_len)?;
    if dtype != T::DTYPE.as_bytes() {
        return Err(Error::Checkpoint(format!(
            "scalar type {} does not match requested {}",
            String::from_utf8_lossy(dtype),
            T::DTYPE
        )));
    }
    let input_dim = r.u32()? as usize;
    let n_agents = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    if n_hidden > 1024 {
        return Err(Error::Checkpoint(format!("implausible hidden layer count {n_hidden}")));
    }
    let hidden_dims = (0..n_hidden).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let dropout_rate = r.f64()?;
    let confidence_head = match r.u8()? {
        0 => false,
        1 => true,
        b => return Err(Error::Checkpoint(format!("bad confidence flag {b}"))),
    };
    let config = NetworkConfig {
        input_dim,
        hidden_dims,
        n_agents,
        dropout_rate,
        confidence_head,
    };
    config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

    let mut params = Parameters::<T>::zeros(&config);
    let expected = params.shapes();
    let n_tensors = r.u32()? as usize;
    if n_tensors != expected.len() {
        return Err(Error::Checkpoint(format!(
            "tensor count {n_tensors} does not match config ({})",
            expected.len()
        )));
    }
    for (i, (shape, dst)) in expected.iter().zip(params.tensors_mut()).enumerate() {
        let rank = r.u8()? as usize;
        let dims = (0..rank).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        if &dims != shape {
            return Err(Error::Checkpoint(format!(
                "tensor {i} has shape {dims:?}, expected {shape:?}"
            )));
        }
        for v in dst.iter_mut() {
            *v = T::of(r.f64()?);
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after last tensor",
            bytes.len() - r.pos
        )));
    }
    Mlp::from_parts(config, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated at byte {} (needed {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
