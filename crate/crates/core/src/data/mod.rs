//! Synthetic volumes, labels, evaluation regions and the volume file format.

pub mod format;
pub mod synthetic;
pub mod volume;

pub use format::{decode_volume, encode_volume, read_volume, write_volume};
pub use synthetic::{
    assign_splits, generate_synthetic, manifest_for, synthesize_sample, DatasetManifest, ManifestEntry, Split,
    SyntheticSpec, LABELS, MODALITIES,
};
pub use volume::{argmax_labels, one_hot, region_masks, LabelVolume, Region, VolumeSample};
