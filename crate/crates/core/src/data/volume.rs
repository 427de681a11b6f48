use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{voxel_count, Dims, Field};

/// Integer label grid, z fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVolume {
    dims: Dims,
    data: Vec<u8>,
}

impl LabelVolume {
    pub fn zeros(dims: Dims) -> Self {
        LabelVolume {
            dims,
            data: vec![0; voxel_count(dims)],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<u8>) -> Result<Self> {
        if data.len() != voxel_count(dims) {
            return Err(Error::shape(format!("{} labels", voxel_count(dims)), data.len()));
        }
        Ok(LabelVolume { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(voxel_count(dims));
        for x in 0..dims[0] {
            for y in 0..dims[1] {
                for z in 0..dims[2] {
                    data.push(f(x, y, z));
                }
            }
        }
        LabelVolume { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[(x * self.dims[1] + y) * self.dims[2] + z]
    }

    pub fn max_label(&self) -> u8 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn check_alphabet(&self, alphabet: usize) -> Result<()> {
        match self.data.iter().find(|&&l| l as usize >= alphabet) {
            Some(&label) => Err(Error::LabelOutOfRange { label, alphabet }),
            None => Ok(()),
        }
    }
}

/// One multi-modality volume with its segmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeSample {
    pub id: String,
    pub image: Field<f32>,
    pub labels: LabelVolume,
    pub spacing: [f64; 3],
}

impl VolumeSample {
    pub fn new(id: impl Into<String>, image: Field<f32>, labels: LabelVolume) -> Result<Self> {
        if image.dims() != labels.dims() {
            return Err(Error::shape(
                format!("labels of shape {:?}", image.dims()),
                format!("{:?}", labels.dims()),
            ));
        }
        Ok(VolumeSample {
            id: id.into(),
            image,
            labels,
            spacing: [1.0; 3],
        })
    }

    pub fn dims(&self) -> Dims {
        self.labels.dims()
    }
}

/// One channel per label with a single 1 at every voxel.
pub fn one_hot<T: Scalar>(labels: &LabelVolume, alphabet: usize) -> Result<Field<T>> {
    labels.check_alphabet(alphabet)?;
    let n = labels.data.len();
    let mut out = Field::zeros(alphabet, labels.dims);
    let data = out.data_mut();
    for (i, &l) in labels.data.iter().enumerate() {
        data[l as usize * n + i] = T::one();
    }
    Ok(out)
}

/// Per-voxel argmax over channels; ties go to the lower label.
pub fn argmax_labels<T: Scalar>(scores: &Field<T>) -> LabelVolume {
    let n = scores.voxels();
    let d = scores.data();
    let data = (0..n)
        .map(|i| {
            let mut best = 0;
            for c in 1..scores.channels() {
                if d[c * n + i] > d[best * n + i] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    LabelVolume {
        dims: scores.dims(),
        data,
    }
}

/// Evaluation regions built from unions of the base labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Labels 1, 2, 3.
    Whole,
    /// Labels 2, 3.
    Core,
    /// Label 3.
    Enhancing,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Whole, Region::Core, Region::Enhancing];

    pub fn labels(self) -> &'static [u8] {
        match self {
            Region::Whole => &[1, 2, 3],
            Region::Core => &[2, 3],
            Region::Enhancing => &[3],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Whole => "wt",
            Region::Core => "tc",
            Region::Enhancing => "et",
        }
    }

    pub fn mask(self, labels: &LabelVolume) -> Vec<bool> {
        let set = self.labels();
        labels.data.iter().map(|l| set.contains(l)).collect()
    }
}

/// The three nested masks `(whole, core, enhancing)`.
pub fn region_masks(labels: &LabelVolume) -> [Vec<bool>; 3] {
    Region::ALL.map(|r| r.mask(labels))
}
