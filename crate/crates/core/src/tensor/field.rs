use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Spatial extent `[nx, ny, nz]`.
pub type Dims = [usize; 3];

#[inline]
/// Sum with eight interleaved accumulators. The order is fixed, so results
/// are reproducible, and the loop vectorizes.
pub fn lane_sum<T: Scalar>(a: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.chunks_exact(8);
    let rest = chunks.remainder();
    for c in chunks {
        for k in 0..8 {
            acc[k] += c[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for &r in rest {
        s += r;
    }
    s
}

/// Dot product with the accumulation pattern of [`lane_sum`].
pub fn lane_dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (&x, &y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

pub fn voxel_count(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

/// Dense multi-channel 3D grid, channel-major with `z` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    channels: usize,
    dims: Dims,
    data: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn zeros(channels: usize, dims: Dims) -> Self {
        Self::constant(channels, dims, T::zero())
    }

    pub fn constant(channels: usize, dims: Dims, value: T) -> Self {
        Field {
            channels,
            dims,
            data: vec![value; channels * voxel_count(dims)],
        }
    }

    pub fn from_vec(channels: usize, dims: Dims, data: Vec<T>) -> Result<Self> {
        let expected = channels * voxel_count(dims);
        if data.len() != expected {
            return Err(Error::shape(
                format!("{expected} elements for {channels}x{dims:?}"),
                data.len(),
            ));
        }
        Ok(Field { channels, dims, data })
    }

    /// Builds a field by evaluating `f(c, x, y, z)` at every element.
    pub fn from_fn(channels: usize, dims: Dims, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(channels * voxel_count(dims));
        for c in 0..channels {
            for x in 0..dims[0] {
                for y in 0..dims[1] {
                    for z in 0..dims[2] {
                        data.push(f(c, x, y, z));
                    }
                }
            }
        }
        Field { channels, dims, data }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn voxels(&self) -> usize {
        voxel_count(self.dims)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize, z: usize) -> usize {
        ((c * self.dims[0] + x) * self.dims[1] + y) * self.dims[2] + z
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize, z: usize) -> T {
        self.data[self.index(c, x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, z: usize, v: T) {
        let i = self.index(c, x, y, z);
        self.data[i] = v;
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.voxels();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.voxels();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Field<T>) -> bool {
        self.channels == other.channels && self.dims == other.dims
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}x{}", self.channels, self.dims[0], self.dims[1], self.dims[2])
    }

    pub(crate) fn check_same_shape(&self, other: &Field<T>) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(self.shape_string(), other.shape_string()))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Field<T> {
        Field {
            channels: self.channels,
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field<T>, f: impl Fn(T, T) -> T) -> Result<Field<T>> {
        self.check_same_shape(other)?;
        Ok(Field {
            channels: self.channels,
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field<T>) -> Result<Field<T>> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Field<T> {
        self.map(|v| v * s)
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Field<T>) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self) -> T {
        lane_sum(&self.data)
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_usize_lossy(self.data.len().max(1))
    }

    pub fn max(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Field<T>) -> Result<T> {
        self.check_same_shape(other)?;
        Ok(lane_dot(&self.data, &other.data))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Applies a `d_out x d_in` row-major channel matrix at every voxel.
    pub fn apply_channel_matrix(&self, matrix: &[T], d_out: usize) -> Result<Field<T>> {
        let d_in = self.channels;
        if matrix.len() != d_out * d_in {
            return Err(Error::shape(format!("{d_out}x{d_in} matrix"), matrix.len()));
        }
        let n = self.voxels();
        let mut out = Field::zeros(d_out, self.dims);
        for o in 0..d_out {
            let dst = &mut out.data[o * n..(o + 1) * n];
            for i in 0..d_in {
                let w = matrix[o * d_in + i];
                if w == T::zero() {
                    continue;
                }
                for (d, &s) in dst.iter_mut().zip(&self.data[i * n..(i + 1) * n]) {
                    *d += w * s;
                }
            }
        }
        Ok(out)
    }

    /// Converts the element type, rounding where needed.
    pub fn cast<U: Scalar>(&self) -> Field<U> {
        Field {
            channels: self.channels,
            dims: self.dims,
            data: self.data.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect(),
        }
    }

    /// Selects a subset of channels in the given order.
    pub fn select_channels(&self, which: &[usize]) -> Field<T> {
        let n = self.voxels();
        let mut data = Vec::with_capacity(which.len() * n);
        for &c in which {
            data.extend_from_slice(self.channel(c));
        }
        Field {
            channels: which.len(),
            dims: self.dims,
            data,
        }
    }
}
