//! "FNV1" volume files: magic, version, canonical JSON header, then the
//! little-endian f32 image followed by u8 labels.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::volume::{LabelVolume, VolumeSample};
use crate::error::{Error, Result};
use crate::tensor::{voxel_count, Field};

pub const VOLUME_MAGIC: &[u8; 4] = b"FNV1";
pub const VOLUME_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct VolumeHeader {
    id: String,
    shape: [usize; 3],
    channels: usize,
    channel_names: Vec<String>,
    image_dtype: String,
    label_dtype: String,
    label_alphabet: usize,
    spacing: [f64; 3],
}

pub const CHANNEL_NAMES: [&str; 4] = ["t1", "t1c", "t2", "flair"];

pub fn encode_volume(sample: &VolumeSample, label_alphabet: usize) -> Result<Vec<u8>> {
    let channels = sample.image.channels();
    let header = VolumeHeader {
        id: sample.id.clone(),
        shape: sample.dims(),
        channels,
        channel_names: (0..channels)
            .map(|c| CHANNEL_NAMES.get(c).map_or_else(|| format!("ch{c}"), |s| s.to_string()))
            .collect(),
        image_dtype: "f32".into(),
        label_dtype: "u8".into(),
        label_alphabet,
        spacing: sample.spacing,
    };
    let json = crate::canonical::to_string(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + sample.image.len() * 4 + sample.labels.data().len());
    out.extend_from_slice(VOLUME_MAGIC);
    out.extend_from_slice(&VOLUME_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    for v in sample.image.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(sample.labels.data());
    Ok(out)
}

pub fn decode_volume(bytes: &[u8]) -> Result<VolumeSample> {
    if bytes.len() < 12 {
        return Err(Error::Truncated {
            expected: 12,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != VOLUME_MAGIC {
        return Err(Error::CorruptHeader("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VOLUME_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VOLUME_VERSION,
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
    let h: VolumeHeader =
        serde_json::from_slice(&bytes[12..body]).map_err(|e| Error::CorruptHeader(format!("header json: {e}")))?;
    if h.image_dtype != "f32" || h.label_dtype != "u8" {
        return Err(Error::CorruptHeader(format!(
            "dtypes {} / {}",
            h.image_dtype, h.label_dtype
        )));
    }
    let n = voxel_count(h.shape);
    let expected = body + n * h.channels * 4 + n;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::CorruptHeader(format!(
            "{} trailing bytes",
            bytes.len() - expected
        )));
    }
    let img_end = body + n * h.channels * 4;
    let image = bytes[body..img_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels = LabelVolume::from_vec(h.shape, bytes[img_end..].to_vec())?;
    labels.check_alphabet(h.label_alphabet)?;
    let mut sample = VolumeSample::new(h.id, Field::from_vec(h.channels, h.shape, image)?, labels)?;
    sample.spacing = h.spacing;
    Ok(sample)
}

pub fn write_volume(sample: &VolumeSample, label_alphabet: usize, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_volume(sample, label_alphabet)?)?;
    Ok(())
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<VolumeSample> {
    decode_volume(&fs::read(path)?)
}
