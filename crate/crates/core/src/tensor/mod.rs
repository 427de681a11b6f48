//! Dense real fields, their half spectra, and the 3D real FFT.

pub mod fft;
pub mod field;
pub mod spectrum;

pub use fft::{fft3, half_weight, ifft3};
pub use field::{voxel_count, Dims, Field};
pub use spectrum::Spectrum;
