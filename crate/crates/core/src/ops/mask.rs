use serde::{Deserialize, Serialize};

use crate::tensor::Dims;

/// Signed frequency of FFT index `k` on an axis of length `n`.
///
/// Indices up to and including `n/2` are non-negative, so the Nyquist
/// index of an even axis maps to `+n/2`.
#[inline]
pub fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Retained-mode bounds per axis for spectral convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeMask {
    pub k_max: [usize; 3],
}

impl ModeMask {
    pub fn new(k_max: [usize; 3]) -> Self {
        ModeMask { k_max }
    }

    /// A mask that retains every mode of any grid up to `n` per axis.
    pub fn full(n: usize) -> Self {
        ModeMask { k_max: [n, n, n] }
    }

    /// Whether half-spectrum index `(kx, ky, kz)` survives truncation on a grid of `dims`.
    #[inline]
    pub fn retains(&self, kx: usize, ky: usize, kz: usize, dims: Dims) -> bool {
        signed_freq(kx, dims[0]).unsigned_abs() as usize <= self.k_max[0]
            && signed_freq(ky, dims[1]).unsigned_abs() as usize <= self.k_max[1]
            && kz <= self.k_max[2]
    }

    /// Retained half-spectrum indices for a real grid of `dims`, in storage order.
    pub fn retained(&self, dims: Dims) -> Vec<[usize; 3]> {
        let nh = dims[2] / 2 + 1;
        let mut out = Vec::new();
        for kx in 0..dims[0] {
            for ky in 0..dims[1] {
                for kz in 0..nh {
                    if self.retains(kx, ky, kz, dims) {
                        out.push([kx, ky, kz]);
                    }
                }
            }
        }
        out
    }

    /// Extent of the signed-frequency box `[-k_max, k_max]` per axis.
    pub fn table_extent(&self) -> [usize; 3] {
        [2 * self.k_max[0] + 1, 2 * self.k_max[1] + 1, 2 * self.k_max[2] + 1]
    }

    /// Number of entries in the per-mode weight table.
    pub fn table_len(&self) -> usize {
        let [a, b, c] = self.table_extent();
        a * b * c
    }

    /// Table slot for a signed frequency triple inside the box.
    #[inline]
    pub fn table_index(&self, s: [i64; 3]) -> usize {
        let [_, ey, ez] = self.table_extent();
        let ix = (s[0] + self.k_max[0] as i64) as usize;
        let iy = (s[1] + self.k_max[1] as i64) as usize;
        let iz = (s[2] + self.k_max[2] as i64) as usize;
        (ix * ey + iy) * ez + iz
    }
}
