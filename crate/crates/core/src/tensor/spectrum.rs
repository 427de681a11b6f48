use num_complex::Complex;

use super::field::Dims;
use crate::scalar::Scalar;

/// Half-spectrum Fourier coefficients of a real multi-channel field.
///
/// Shape is `channels x nx x ny x (nz/2 + 1)`, `kz` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    channels: usize,
    half: Dims,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> Spectrum<T> {
    /// Zero spectrum for a real field with spatial extent `dims`.
    pub fn zeros(channels: usize, dims: Dims) -> Self {
        let half = [dims[0], dims[1], dims[2] / 2 + 1];
        Spectrum {
            channels,
            half,
            data: vec![Complex::new(T::zero(), T::zero()); channels * half[0] * half[1] * half[2]],
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `[nx, ny, nz/2 + 1]`.
    #[inline]
    pub fn half_dims(&self) -> Dims {
        self.half
    }

    #[inline]
    pub fn modes_per_channel(&self) -> usize {
        self.half[0] * self.half[1] * self.half[2]
    }

    #[inline]
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, c: usize, kx: usize, ky: usize, kz: usize) -> usize {
        ((c * self.half[0] + kx) * self.half[1] + ky) * self.half[2] + kz
    }

    #[inline]
    pub fn get(&self, c: usize, kx: usize, ky: usize, kz: usize) -> Complex<T> {
        self.data[self.index(c, kx, ky, kz)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, kx: usize, ky: usize, kz: usize, v: Complex<T>) {
        let i = self.index(c, kx, ky, kz);
        self.data[i] = v;
    }
}
