//! Binary checkpoint: magic, version, JSON header, little-endian payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::Model;
use crate::error::{Error, Result};
use crate::ops::ParamStore;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FNCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

/// Serializes `model` to bytes.
pub fn encode<T: Scalar>(model: &Model<T>) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut offset = 0;
    for p in model.params().iter() {
        tensors.push(TensorEntry {
            name: p.name.clone(),
            dtype: T::DTYPE.to_string(),
            shape: p.shape.clone(),
            offset,
        });
        offset += p.value.len() * T::BYTES;
    }
    let header = Header {
        config: model.config().clone(),
        tensors,
    };
    let json = crate::canonical::to_string(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + offset);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    for p in model.params().iter() {
        for &v in &p.value {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

/// Parses bytes produced by [`encode`].
pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Model<T>> {
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            expected: 12,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::CorruptHeader("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = 12 + hlen;
    if bytes.len() < body {
        return Err(Error::Truncated {
            expected: body,
            found: bytes.len(),
        });
    }
    let header: Header =
        serde_json::from_slice(&bytes[12..body]).map_err(|e| Error::CorruptHeader(format!("header json: {e}")))?;
    let payload = &bytes[body..];
    let mut params = ParamStore::new();
    let mut expected_offset = 0;
    for t in &header.tensors {
        if t.dtype != T::DTYPE {
            return Err(Error::CorruptHeader(format!(
                "tensor {} has dtype {}, expected {}",
                t.name,
                t.dtype,
                T::DTYPE
            )));
        }
        if t.offset != expected_offset {
            return Err(Error::CorruptHeader(format!(
                "tensor {} at offset {}",
                t.name, t.offset
            )));
        }
        let n: usize = t.shape.iter().product();
        let end = t.offset + n * T::BYTES;
        if payload.len() < end {
            return Err(Error::Truncated {
                expected: body + end,
                found: bytes.len(),
            });
        }
        let values = payload[t.offset..end].chunks_exact(T::BYTES).map(T::read_le).collect();
        params.add(t.name.clone(), t.shape.clone(), values);
        expected_offset = end;
    }
    if payload.len() != expected_offset {
        return Err(Error::CorruptHeader(format!(
            "{} trailing payload bytes",
            payload.len() - expected_offset
        )));
    }
    Model::from_params(header.config, params)
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(model)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Model<T>> {
    decode(&fs::read(path)?)
}
