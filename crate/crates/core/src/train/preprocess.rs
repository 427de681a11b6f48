//! Normalization, resolution changes and random affine augmentation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{LabelVolume, VolumeSample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Dims, Field};

/// Per-channel z-score over the whole volume. Channels whose variance is at
/// rounding level are mapped to zero.
pub fn normalize_modality<T: Scalar>(volume: &Field<T>) -> Field<T> {
    let mut out = volume.clone();
    let n = volume.voxels() as f64;
    for c in 0..volume.channels() {
        let ch = out.channel_mut(c);
        let mean = ch.iter().map(|v| v.as_f64()).sum::<f64>() / n;
        let var = ch.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n;
        let floor = 64.0 * T::epsilon().as_f64().powi(2) * (mean * mean).max(1e-300);
        if var <= floor {
            ch.iter_mut().for_each(|v| *v = T::zero());
            continue;
        }
        let inv = 1.0 / var.sqrt();
        ch.iter_mut()
            .for_each(|v| *v = T::from_f64_lossy((v.as_f64() - mean) * inv));
    }
    out
}

/// Extent after downsampling by `factor`.
pub fn downsampled_dims(dims: Dims, factor: usize) -> Dims {
    dims.map(|n| n.div_ceil(factor))
}

/// Source coordinate of output index `j` when `n` samples map onto `m`,
/// with sample centers aligned.
#[inline]
fn source_coord(j: usize, n: usize, m: usize) -> f64 {
    (j as f64 + 0.5) * n as f64 / m as f64 - 0.5
}

/// Linear interpolation taps `(i0, i1, w1)` clamped to the axis.
fn linear_taps(n: usize, m: usize) -> Vec<(usize, usize, f64)> {
    (0..m)
        .map(|j| {
            let s = source_coord(j, n, m).clamp(0.0, (n - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Trilinear resampling to `target`, sample centers aligned.
pub fn resize_trilinear<T: Scalar>(v: &Field<T>, target: Dims) -> Field<T> {
    let dims = v.dims();
    if dims == target {
        return v.clone();
    }
    let tx = linear_taps(dims[0], target[0]);
    let ty = linear_taps(dims[1], target[1]);
    let tz = linear_taps(dims[2], target[2]);
    let mut out = Field::zeros(v.channels(), target);
    for c in 0..v.channels() {
        let src = v.channel(c);
        let at = |x: usize, y: usize, z: usize| src[(x * dims[1] + y) * dims[2] + z].as_f64();
        let dst = out.channel_mut(c);
        let mut i = 0;
        for &(x0, x1, wx) in &tx {
            for &(y0, y1, wy) in &ty {
                for &(z0, z1, wz) in &tz {
                    let lerp = |a: f64, b: f64, w: f64| a + w * (b - a);
                    let c00 = lerp(at(x0, y0, z0), at(x0, y0, z1), wz);
                    let c01 = lerp(at(x0, y1, z0), at(x0, y1, z1), wz);
                    let c10 = lerp(at(x1, y0, z0), at(x1, y0, z1), wz);
                    let c11 = lerp(at(x1, y1, z0), at(x1, y1, z1), wz);
                    dst[i] = T::from_f64_lossy(lerp(lerp(c00, c01, wy), lerp(c10, c11, wy), wx));
                    i += 1;
                }
            }
        }
    }
    out
}

/// Nearest-neighbor resampling of labels to `target`.
pub fn resize_nearest(labels: &LabelVolume, target: Dims) -> LabelVolume {
    let dims = labels.dims();
    let idx = |n: usize, m: usize| -> Vec<usize> {
        (0..m)
            .map(|j| ((j as f64 + 0.5) * n as f64 / m as f64).floor().min((n - 1) as f64) as usize)
            .collect()
    };
    let (ix, iy, iz) = (
        idx(dims[0], target[0]),
        idx(dims[1], target[1]),
        idx(dims[2], target[2]),
    );
    LabelVolume::from_fn(target, |x, y, z| labels.get(ix[x], iy[y], iz[z]))
}

/// Trilinear downsampling of an image to `ceil(n / factor)` per axis.
pub fn downsample_volume<T: Scalar>(v: &Field<T>, factor: usize) -> Result<Field<T>> {
    if factor < 1 {
        return Err(Error::InvalidFactor(factor));
    }
    Ok(resize_trilinear(v, downsampled_dims(v.dims(), factor)))
}

pub fn downsample_labels(labels: &LabelVolume, factor: usize) -> Result<LabelVolume> {
    if factor < 1 {
        return Err(Error::InvalidFactor(factor));
    }
    Ok(resize_nearest(labels, downsampled_dims(labels.dims(), factor)))
}

pub fn downsample_sample(sample: &VolumeSample, factor: usize) -> Result<VolumeSample> {
    if factor == 1 {
        return Ok(sample.clone());
    }
    let mut s = VolumeSample::new(
        sample.id.clone(),
        downsample_volume(&sample.image, factor)?,
        downsample_labels(&sample.labels, factor)?,
    )?;
    s.spacing = sample.spacing.map(|v| v * factor as f64);
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Axial rotation bound in degrees.
    pub rotation_deg: f64,
    /// Shift bound as a fraction of each axis length.
    pub shift_fraction: f64,
    pub scale_range: [f64; 2],
    pub apply_probability: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            rotation_deg: 30.0,
            shift_fraction: 0.2,
            scale_range: [0.8, 1.2],
            apply_probability: 0.8,
        }
    }
}

/// Forward map `o = c + t + s R (p - c)` with `R` a rotation about the last
/// axis, `c` the grid center, in voxel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub angle_rad: f64,
    pub scale: f64,
    pub shift: [f64; 3],
}

impl Affine {
    pub fn identity() -> Self {
        Affine {
            angle_rad: 0.0,
            scale: 1.0,
            shift: [0.0; 3],
        }
    }

    /// Source position of output voxel `o`.
    fn inverse(&self, o: [f64; 3], c: [f64; 3]) -> [f64; 3] {
        let d = [
            o[0] - c[0] - self.shift[0],
            o[1] - c[1] - self.shift[1],
            o[2] - c[2] - self.shift[2],
        ];
        let (s, cs) = self.angle_rad.sin_cos();
        let inv = 1.0 / self.scale;
        [
            c[0] + inv * (cs * d[0] + s * d[1]),
            c[1] + inv * (-s * d[0] + cs * d[1]),
            c[2] + inv * d[2],
        ]
    }
}

/// Draws the transform for one sample, or `None` when the probability branch
/// is not taken. Always consumes the same number of draws.
pub fn sample_affine(cfg: &AugmentConfig, dims: Dims, rng: &mut impl Rng) -> Option<Affine> {
    let apply = rng.gen::<f64>() < cfg.apply_probability;
    let angle = cfg.rotation_deg.to_radians() * rng.gen_range(-1.0..=1.0);
    let scale = rng.gen_range(cfg.scale_range[0]..=cfg.scale_range[1]);
    let shift: [f64; 3] = std::array::from_fn(|a| cfg.shift_fraction * dims[a] as f64 * rng.gen_range(-1.0..=1.0));
    apply.then_some(Affine {
        angle_rad: angle,
        scale,
        shift,
    })
}

/// Resamples a sample through `affine`: trilinear for the image, nearest for
/// labels, zero outside the grid.
pub fn apply_affine(sample: &VolumeSample, affine: &Affine) -> VolumeSample {
    let dims = sample.dims();
    let c = dims.map(|n| (n as f64 - 1.0) / 2.0);
    let n = sample.labels.data().len();
    let channels = sample.image.channels();
    let mut image = Field::<f32>::zeros(channels, dims);
    let mut labels = vec![0u8; n];
    let src = sample.image.data();
    let inside = |i: i64, a: usize| i >= 0 && (i as usize) < dims[a];
    let mut acc = vec![0.0f64; channels];
    let mut i = 0;
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                let p = affine.inverse([x as f64, y as f64, z as f64], c);
                let r = p.map(|v| v.round() as i64);
                if (0..3).all(|a| inside(r[a], a)) {
                    labels[i] = sample.labels.get(r[0] as usize, r[1] as usize, r[2] as usize);
                }
                let f = p.map(f64::floor);
                let base = f.map(|v| v as i64);
                let w = [p[0] - f[0], p[1] - f[1], p[2] - f[2]];
                acc.iter_mut().for_each(|a| *a = 0.0);
                for tap in 0..8 {
                    let o = [tap >> 2, (tap >> 1) & 1, tap & 1];
                    let q: [i64; 3] = std::array::from_fn(|a| base[a] + o[a] as i64);
                    if !(0..3).all(|a| inside(q[a], a)) {
                        continue;
                    }
                    let wt: f64 = (0..3).map(|a| if o[a] == 1 { w[a] } else { 1.0 - w[a] }).product();
                    if wt == 0.0 {
                        continue;
                    }
                    let s = (q[0] as usize * dims[1] + q[1] as usize) * dims[2] + q[2] as usize;
                    for (ch, a) in acc.iter_mut().enumerate() {
                        *a += wt * src[ch * n + s] as f64;
                    }
                }
                for (ch, a) in acc.iter().enumerate() {
                    image.data_mut()[ch * n + i] = *a as f32;
                }
                i += 1;
            }
        }
    }
    VolumeSample {
        id: sample.id.clone(),
        image,
        labels: LabelVolume::from_vec(dims, labels).expect("same dims"),
        spacing: sample.spacing,
    }
}

/// Applies a random affine with probability `cfg.apply_probability`.
pub fn augment(sample: &VolumeSample, cfg: &AugmentConfig, rng: &mut impl Rng) -> VolumeSample {
    match sample_affine(cfg, sample.dims(), rng) {
        Some(a) => apply_affine(sample, &a),
        None => sample.clone(),
    }
}
