//! Separable 3D real-input FFT built from 1D plans.
//!
//! The forward transform carries the full `1/(nx*ny*nz)` factor so that the
//! coefficient of a bandlimited mode does not depend on the grid size; the
//! inverse is unnormalized. Only `nz/2 + 1` coefficients are kept along `z`.
//! The inverse treats the half spectrum as the conjugate-symmetric extension
//! and returns the real part, so imaginary parts on the self-conjugate `kz`
//! planes are discarded.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftNum, FftPlanner};

use super::field::{Dims, Field};
use super::spectrum::Spectrum;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-thread cache of 1D plans for one element type.
pub trait PlanCache: FftNum + Sized {
    fn complex_plan(n: usize, inverse: bool) -> Arc<dyn Fft<Self>>;
    fn r2c_plan(n: usize) -> Arc<dyn RealToComplex<Self>>;
    fn c2r_plan(n: usize) -> Arc<dyn ComplexToReal<Self>>;
}

macro_rules! plan_cache {
    ($t:ty) => {
        impl PlanCache for $t {
            fn complex_plan(n: usize, inverse: bool) -> Arc<dyn Fft<$t>> {
                thread_local! {
                    static PLANNER: RefCell<FftPlanner<$t>> = RefCell::new(FftPlanner::new());
                }
                PLANNER.with(|p| {
                    let mut p = p.borrow_mut();
                    if inverse {
                        p.plan_fft_inverse(n)
                    } else {
                        p.plan_fft_forward(n)
                    }
                })
            }

            fn r2c_plan(n: usize) -> Arc<dyn RealToComplex<$t>> {
                thread_local! {
                    static PLANS: RefCell<(RealFftPlanner<$t>, HashMap<usize, Arc<dyn RealToComplex<$t>>>)> =
                        RefCell::new((RealFftPlanner::new(), HashMap::new()));
                }
                PLANS.with(|p| {
                    let (planner, cache) = &mut *p.borrow_mut();
                    cache
                        .entry(n)
                        .or_insert_with(|| planner.plan_fft_forward(n))
                        .clone()
                })
            }

            fn c2r_plan(n: usize) -> Arc<dyn ComplexToReal<$t>> {
                thread_local! {
                    static PLANS: RefCell<(RealFftPlanner<$t>, HashMap<usize, Arc<dyn ComplexToReal<$t>>>)> =
                        RefCell::new((RealFftPlanner::new(), HashMap::new()));
                }
                PLANS.with(|p| {
                    let (planner, cache) = &mut *p.borrow_mut();
                    cache
                        .entry(n)
                        .or_insert_with(|| planner.plan_fft_inverse(n))
                        .clone()
                })
            }
        }
    };
}

plan_cache!(f32);
plan_cache!(f64);

fn check_dims(dims: Dims) -> Result<()> {
    for (axis, &n) in dims.iter().enumerate() {
        if n < 2 {
            return Err(Error::DimensionTooSmall { axis, size: n, min: 2 });
        }
    }
    Ok(())
}

/// Complex FFT along the `y` axis of an `nx x ny x nh` block, in place.
fn fft_axis_y<T: Scalar>(block: &mut [Complex<T>], nx: usize, ny: usize, nh: usize, inverse: bool) {
    let plan = T::complex_plan(ny, inverse);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); ny * nh];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
    for plane in block.chunks_exact_mut(ny * nh).take(nx) {
        for y in 0..ny {
            for k in 0..nh {
                buf[k * ny + y] = plane[y * nh + k];
            }
        }
        plan.process_with_scratch(&mut buf, &mut scratch);
        for y in 0..ny {
            for k in 0..nh {
                plane[y * nh + k] = buf[k * ny + y];
            }
        }
    }
}

/// Complex FFT along the `x` axis (stride `ny*nh`), in place, with an output scale.
fn fft_axis_x<T: Scalar>(block: &mut [Complex<T>], nx: usize, inner: usize, inverse: bool, scale: T) {
    let plan = T::complex_plan(nx, inverse);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); nx * inner];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
    for x in 0..nx {
        for j in 0..inner {
            buf[j * nx + x] = block[x * inner + j];
        }
    }
    plan.process_with_scratch(&mut buf, &mut scratch);
    for x in 0..nx {
        for j in 0..inner {
            block[x * inner + j] = buf[j * nx + x] * scale;
        }
    }
}

fn forward_channel<T: Scalar>(src: &[T], dst: &mut [Complex<T>], dims: Dims) {
    let [nx, ny, nz] = dims;
    let nh = nz / 2 + 1;
    let r2c = T::r2c_plan(nz);
    let mut line = r2c.make_input_vec();
    let mut scratch = r2c.make_scratch_vec();
    for (s, d) in src.chunks_exact(nz).zip(dst.chunks_exact_mut(nh)) {
        line.copy_from_slice(s);
        r2c.process_with_scratch(&mut line, d, &mut scratch)
            .expect("r2c buffer lengths match plan");
    }
    fft_axis_y(dst, nx, ny, nh, false);
    let scale = T::one() / T::from_usize_lossy(nx * ny * nz);
    fft_axis_x(dst, nx, ny * nh, false, scale);
}

fn inverse_channel<T: Scalar>(src: &[Complex<T>], dst: &mut [T], dims: Dims) {
    let [nx, ny, nz] = dims;
    let nh = nz / 2 + 1;
    let mut work = src.to_vec();
    fft_axis_x(&mut work, nx, ny * nh, true, T::one());
    fft_axis_y(&mut work, nx, ny, nh, true);
    let c2r = T::c2r_plan(nz);
    let mut scratch = c2r.make_scratch_vec();
    let even = nz % 2 == 0;
    for (s, d) in work.chunks_exact_mut(nh).zip(dst.chunks_exact_mut(nz)) {
        s[0].im = T::zero();
        if even {
            s[nh - 1].im = T::zero();
        }
        c2r.process_with_scratch(s, d, &mut scratch)
            .expect("c2r buffer lengths match plan");
    }
}

/// Forward 3D transform of every channel, scaled by `1/(nx*ny*nz)`.
pub fn fft3<T: Scalar>(field: &Field<T>) -> Result<Spectrum<T>> {
    let dims = field.dims();
    check_dims(dims)?;
    let mut spec = Spectrum::zeros(field.channels(), dims);
    let n = field.voxels();
    let m = spec.modes_per_channel();
    spec.data_mut()
        .par_chunks_mut(m)
        .zip(field.data().par_chunks(n))
        .for_each(|(dst, src)| forward_channel(src, dst, dims));
    Ok(spec)
}

/// Inverse of [`fft3`] onto a grid whose `z` extent is `nz`.
pub fn ifft3<T: Scalar>(spec: &Spectrum<T>, nz: usize) -> Result<Field<T>> {
    let [nx, ny, nh] = spec.half_dims();
    if nz / 2 + 1 != nh {
        return Err(Error::shape(
            format!("nz_half = {}", nz / 2 + 1),
            format!("nz_half = {nh}"),
        ));
    }
    let dims = [nx, ny, nz];
    check_dims(dims)?;
    let mut out = Field::zeros(spec.channels(), dims);
    let n = out.voxels();
    let m = spec.modes_per_channel();
    out.data_mut()
        .par_chunks_mut(n)
        .zip(spec.data().par_chunks(m))
        .for_each(|(dst, src)| inverse_channel(src, dst, dims));
    Ok(out)
}

/// Multiplicity of a half-spectrum plane in the full spectrum: 1 for the
/// self-conjugate planes `kz = 0` and `kz = nz/2` (even `nz`), otherwise 2.
#[inline]
pub fn half_weight(kz: usize, nz: usize) -> usize {
    if kz == 0 || (nz.is_multiple_of(2) && kz == nz / 2) {
        1
    } else {
        2
    }
}
