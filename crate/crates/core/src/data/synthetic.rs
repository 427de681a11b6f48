//! Nested deformed-ellipsoid volumes with four contrast channels.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::format::{read_volume, write_volume};
use super::volume::{LabelVolume, VolumeSample};
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{Dims, Field};

pub const LABELS: usize = 4;
pub const MODALITIES: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub grid: Dims,
    pub samples: usize,
    pub test_samples: usize,
    pub val_fraction: f64,
    /// Outer-region mean radius range as a fraction of the smallest axis.
    pub outer_radius: [f64; 2],
    /// Middle radius as a fraction of the outer one.
    pub middle_fraction: [f64; 2],
    /// Inner radius as a fraction of the middle one.
    pub inner_fraction: [f64; 2],
    /// Per-axis radius jitter: each axis is scaled by `1 +- anisotropy`.
    pub anisotropy: f64,
    /// Relative amplitude of the smooth boundary deformation.
    pub deformation: f64,
    /// Tumor center offset from the grid center, fraction of each axis.
    pub center_jitter: f64,
    /// Background "tissue" ellipsoid radius, fraction of each axis.
    pub tissue_radius: f64,
    /// Rows: outside, tissue, outer, middle, inner. Columns: modalities.
    pub contrast: [[f64; MODALITIES]; 5],
    /// Gaussian noise sigma as a fraction of each modality's contrast range.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            grid: [64, 64, 64],
            samples: 200,
            test_samples: 40,
            val_fraction: 0.1,
            outer_radius: [0.18, 0.27],
            middle_fraction: [0.65, 0.8],
            inner_fraction: [0.5, 0.7],
            anisotropy: 0.2,
            deformation: 0.15,
            center_jitter: 0.1,
            tissue_radius: 0.42,
            contrast: [
                [0.0, 0.0, 0.0, 0.0],
                [0.6, 0.6, 0.4, 0.4],
                [0.5, 0.55, 0.8, 0.9],
                [0.55, 1.0, 0.7, 0.7],
                [0.3, 0.35, 0.95, 0.6],
            ],
            noise: 0.3,
            seed: 2024,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.grid.iter().any(|&n| n < 4) {
            return bad(format!("grid {:?} must be >= 4 per axis", self.grid));
        }
        if self.samples == 0 || self.test_samples >= self.samples {
            return bad(format!(
                "need test_samples < samples, got {} / {}",
                self.test_samples, self.samples
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must be in [0, 1)".into());
        }
        if !(0.0..0.5).contains(&self.deformation) || !(0.0..0.5).contains(&self.anisotropy) {
            return bad("deformation and anisotropy must be in [0, 0.5)".into());
        }
        for (name, r) in [
            ("outer_radius", self.outer_radius),
            ("middle_fraction", self.middle_fraction),
            ("inner_fraction", self.inner_fraction),
        ] {
            if !(r[0] > 0.0 && r[0] <= r[1]) {
                return bad(format!("{name} range {r:?} invalid"));
            }
        }
        if self.middle_fraction[1] >= 1.0 || self.inner_fraction[1] >= 1.0 {
            return bad("nested fractions must stay below 1".into());
        }
        if self.noise < 0.0 {
            return bad("noise must be >= 0".into());
        }
        // the voxel nearest the center must fall in the innermost region
        let min_axis = *self.grid.iter().min().unwrap() as f64;
        let smallest = min_axis * self.outer_radius[0] * self.middle_fraction[0] * self.inner_fraction[0];
        let shrink = (1.0 - self.anisotropy) * (1.0 - self.deformation);
        if smallest * shrink < 0.9 {
            return bad(format!(
                "innermost radius {:.2} voxels too small for the grid",
                smallest * shrink
            ));
        }
        Ok(())
    }

    pub fn hash(&self) -> Result<String> {
        let json = crate::canonical::to_string(self)?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Smooth direction-dependent radius modulation in [-1, 1].
struct Deformation {
    terms: Vec<([f64; 3], f64, f64)>,
}

impl Deformation {
    fn draw(rng: &mut impl Rng) -> Self {
        let terms = (0..3)
            .map(|_| {
                (
                    unit_vector(rng),
                    rng.gen_range(1.0..3.0),
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Deformation { terms }
    }

    fn eval(&self, u: [f64; 3]) -> f64 {
        let s: f64 = self
            .terms
            .iter()
            .map(|(w, f, p)| (f * (w[0] * u[0] + w[1] * u[1] + w[2] * u[2]) + p).sin())
            .sum();
        s / self.terms.len() as f64
    }
}

fn unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Random rotation from a uniformly drawn unit quaternion.
fn rotation(rng: &mut impl Rng) -> [[f64; 3]; 3] {
    let q: [f64; 4] = loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            break v.map(|x| x / n);
        }
    };
    let [w, x, y, z] = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

struct Level {
    radii: [f64; 3],
    deform: Deformation,
    amplitude: f64,
}

impl Level {
    fn contains(&self, q: [f64; 3]) -> bool {
        let s = [q[0] / self.radii[0], q[1] / self.radii[1], q[2] / self.radii[2]];
        let d2 = s[0] * s[0] + s[1] * s[1] + s[2] * s[2];
        if d2 == 0.0 {
            return true;
        }
        let r = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = 1.0 + self.amplitude * self.deform.eval([q[0] / r, q[1] / r, q[2] / r]);
        d2 <= bound * bound
    }
}

/// Generates sample `index` of the dataset in memory.
pub fn synthesize_sample(spec: &SyntheticSpec, index: usize) -> Result<VolumeSample> {
    spec.validate()?;
    let g = spec.grid;
    let mut rng = seed::rng(spec.seed, "synthetic/geometry", &[index as u64]);
    let min_axis = *g.iter().min().unwrap() as f64;
    let center: [f64; 3] = std::array::from_fn(|a| {
        (g[a] as f64 - 1.0) / 2.0 + spec.center_jitter * g[a] as f64 * rng.gen_range(-1.0..1.0)
    });
    let rot = rotation(&mut rng);
    let aniso: [f64; 3] = std::array::from_fn(|_| 1.0 + spec.anisotropy * rng.gen_range(-1.0..1.0));
    let mut r = min_axis * rng.gen_range(spec.outer_radius[0]..=spec.outer_radius[1]);
    let mut levels = Vec::with_capacity(3);
    for k in 0..3 {
        if k == 1 {
            r *= rng.gen_range(spec.middle_fraction[0]..=spec.middle_fraction[1]);
        } else if k == 2 {
            r *= rng.gen_range(spec.inner_fraction[0]..=spec.inner_fraction[1]);
        }
        levels.push(Level {
            radii: aniso.map(|a| a * r),
            deform: Deformation::draw(&mut rng),
            amplitude: spec.deformation,
        });
    }

    let labels = LabelVolume::from_fn(g, |x, y, z| {
        let p = [x as f64 - center[0], y as f64 - center[1], z as f64 - center[2]];
        let q: [f64; 3] = std::array::from_fn(|i| rot[0][i] * p[0] + rot[1][i] * p[1] + rot[2][i] * p[2]);
        levels.iter().take_while(|l| l.contains(q)).count() as u8
    });

    let tissue = |x: usize, y: usize, z: usize| {
        let c = [x, y, z];
        (0..3)
            .map(|a| {
                let h = (g[a] as f64 - 1.0) / 2.0;
                ((c[a] as f64 - h) / (spec.tissue_radius * g[a] as f64)).powi(2)
            })
            .sum::<f64>()
            <= 1.0
    };
    let sigma: [f64; MODALITIES] = std::array::from_fn(|m| {
        let col = spec.contrast[1..].iter().map(|row| row[m]);
        let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        spec.noise * (hi - lo)
    });
    let mut noise_rng = seed::rng(spec.seed, "synthetic/noise", &[index as u64]);
    let mut image = Field::<f32>::zeros(MODALITIES, g);
    for m in 0..MODALITIES {
        let mut i = 0;
        let ch = image.channel_mut(m);
        for x in 0..g[0] {
            for y in 0..g[1] {
                for z in 0..g[2] {
                    let l = labels.data()[i];
                    let row = if l > 0 {
                        1 + l as usize
                    } else if tissue(x, y, z) {
                        1
                    } else {
                        0
                    };
                    let mut v = spec.contrast[row][m];
                    if sigma[m] > 0.0 {
                        let n: f64 = noise_rng.sample(StandardNormal);
                        v += sigma[m] * n;
                    }
                    ch[i] = v as f32;
                    i += 1;
                }
            }
        }
    }
    VolumeSample::new(format!("synth_{index:04}"), image, labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub index: usize,
    pub path: String,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec: SyntheticSpec,
    pub spec_hash: String,
    pub label_alphabet: usize,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| e.index)
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    /// Reads the samples of one split; `root` is the manifest's directory.
    pub fn read_split(&self, root: &Path, split: Split) -> Result<Vec<VolumeSample>> {
        self.entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| read_volume(root.join(&e.path)))
            .collect()
    }
}

/// Deterministic test / train / validation assignment of sample indices.
/// The validation set is `val_fraction` of the non-test pool.
pub fn assign_splits(spec: &SyntheticSpec) -> Vec<Split> {
    let mut order: Vec<usize> = (0..spec.samples).collect();
    order.shuffle(&mut seed::rng(spec.seed, "synthetic/split", &[]));
    let pool = spec.samples - spec.test_samples;
    let n_val = if pool >= 2 {
        ((pool as f64 * spec.val_fraction).round() as usize).clamp(1, pool - 1)
    } else {
        0
    };
    let mut splits = vec![Split::Train; spec.samples];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < spec.test_samples {
            Split::Test
        } else if rank < spec.test_samples + n_val {
            Split::Val
        } else {
            Split::Train
        };
    }
    splits
}

/// Builds the manifest without touching the filesystem.
pub fn manifest_for(spec: &SyntheticSpec) -> Result<DatasetManifest> {
    spec.validate()?;
    let entries = assign_splits(spec)
        .into_iter()
        .enumerate()
        .map(|(index, split)| ManifestEntry {
            id: format!("synth_{index:04}"),
            index,
            path: format!("synth_{index:04}.fnv"),
            split,
        })
        .collect();
    Ok(DatasetManifest {
        spec: spec.clone(),
        spec_hash: spec.hash()?,
        label_alphabet: LABELS,
        entries,
    })
}

/// Writes every sample and `manifest.json` into `out_dir`.
pub fn generate_synthetic(spec: &SyntheticSpec, out_dir: impl AsRef<Path>) -> Result<(DatasetManifest, PathBuf)> {
    let out_dir = out_dir.as_ref();
    let manifest = manifest_for(spec)?;
    fs::create_dir_all(out_dir)?;
    for e in &manifest.entries {
        let sample = synthesize_sample(spec, e.index)?;
        write_volume(&sample, LABELS, out_dir.join(&e.path))?;
    }
    let path = out_dir.join("manifest.json");
    fs::write(&path, crate::canonical::to_string_pretty(&manifest)?)?;
    Ok((manifest, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            grid: [32, 30, 28],
            samples: 10,
            test_samples: 2,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn splits_are_disjoint_and_sized() {
        let s = assign_splits(&small());
        assert_eq!(s.iter().filter(|&&x| x == Split::Test).count(), 2);
        assert_eq!(s.iter().filter(|&&x| x == Split::Val).count(), 1);
        assert_eq!(s.iter().filter(|&&x| x == Split::Train).count(), 7);
    }

    #[test]
    fn every_region_present() {
        let spec = small();
        for i in 0..spec.samples {
            let s = synthesize_sample(&spec, i).unwrap();
            for l in 1..=3u8 {
                assert!(s.labels.data().contains(&l), "sample {i} lacks label {l}");
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = small();
        s.test_samples = 10;
        assert!(s.validate().is_err());
        let mut s = small();
        s.grid = [8, 8, 8];
        assert!(s.validate().is_err());
    }
}
