//! Fourier-domain channel mixing: `F^-1(R . F v)` with truncated modes.
//!
//! Complex weights are held as separate real and imaginary tensors and every
//! gradient is the derivative with respect to those real parts.
//!
//! Two parameterizations are supported:
//!
//! * shared: one `d_out x d_in` complex matrix applied at every retained mode;
//! * per-mode: one matrix per signed frequency in the box `|s_i| <= k_max_i`
//!   (all three axes signed). Because the output is real, the matrix acting on
//!   half-spectrum mode `k` is the Hermitian average
//!   `(R(s) + conj(R(s')))/2`, where `s'` is the signed frequency of the
//!   conjugate partner index `-k mod n`.

use num_complex::Complex;

use super::mask::{signed_freq, ModeMask};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{fft3, half_weight, ifft3, Dims, Field, Spectrum};

/// Complex matrices attached to retained modes: `(spectrum offset within a
/// channel, matrix slot)` plus the flat matrix table `slots x d_out x d_in`.
struct ModeMatrices<T> {
    modes: Vec<(usize, usize, usize)>,
    re: Vec<T>,
    im: Vec<T>,
}

fn mode_offset(half: Dims, k: [usize; 3]) -> usize {
    (k[0] * half[1] + k[1]) * half[2] + k[2]
}

fn shared_matrices<T: Scalar>(mask: &ModeMask, dims: Dims, re: &[T], im: &[T]) -> Result<ModeMatrices<T>> {
    let retained = mask.retained(dims);
    if retained.is_empty() {
        return Err(Error::EmptyMask {
            nx: dims[0],
            ny: dims[1],
            nz: dims[2],
        });
    }
    let half = [dims[0], dims[1], dims[2] / 2 + 1];
    Ok(ModeMatrices {
        modes: retained
            .iter()
            .map(|&k| (mode_offset(half, k), 0, half_weight(k[2], dims[2])))
            .collect(),
        re: re.to_vec(),
        im: im.to_vec(),
    })
}

/// Signed frequency of mode `k` and of its conjugate partner.
fn mode_pair(k: [usize; 3], dims: Dims) -> ([i64; 3], [i64; 3]) {
    let s = [
        signed_freq(k[0], dims[0]),
        signed_freq(k[1], dims[1]),
        signed_freq(k[2], dims[2]),
    ];
    let p = [
        signed_freq((dims[0] - k[0]) % dims[0], dims[0]),
        signed_freq((dims[1] - k[1]) % dims[1], dims[1]),
        signed_freq((dims[2] - k[2]) % dims[2], dims[2]),
    ];
    (s, p)
}

fn permode_matrices<T: Scalar>(mask: &ModeMask, dims: Dims, re: &[T], im: &[T], dd: usize) -> Result<ModeMatrices<T>> {
    let retained = mask.retained(dims);
    if retained.is_empty() {
        return Err(Error::EmptyMask {
            nx: dims[0],
            ny: dims[1],
            nz: dims[2],
        });
    }
    let half = [dims[0], dims[1], dims[2] / 2 + 1];
    let half_t = T::from_f64_lossy(0.5);
    let mut out = ModeMatrices {
        modes: Vec::with_capacity(retained.len()),
        re: Vec::with_capacity(retained.len() * dd),
        im: Vec::with_capacity(retained.len() * dd),
    };
    for (slot, &k) in retained.iter().enumerate() {
        let (s, p) = mode_pair(k, dims);
        let a = mask.table_index(s) * dd;
        let b = mask.table_index(p) * dd;
        for e in 0..dd {
            out.re.push(half_t * (re[a + e] + re[b + e]));
            out.im.push(half_t * (im[a + e] - im[b + e]));
        }
        out.modes.push((mode_offset(half, k), slot, half_weight(k[2], dims[2])));
    }
    Ok(out)
}

fn check_weights<T>(re: &[T], im: &[T], expected: usize) -> Result<()> {
    if re.len() != expected || im.len() != expected {
        return Err(Error::shape(
            format!("{expected} real and {expected} imaginary weights"),
            format!("{} and {}", re.len(), im.len()),
        ));
    }
    Ok(())
}

fn apply_modes<T: Scalar>(spec: &Spectrum<T>, mats: &ModeMatrices<T>, d_out: usize, dims: Dims) -> Spectrum<T> {
    let d_in = spec.channels();
    let m = spec.modes_per_channel();
    let mut out = Spectrum::zeros(d_out, dims);
    let src = spec.data();
    let dst = out.data_mut();
    let mut v = vec![Complex::new(T::zero(), T::zero()); d_in];
    for &(off, slot, _) in &mats.modes {
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = src[j * m + off];
        }
        let base = slot * d_out * d_in;
        for o in 0..d_out {
            let row = base + o * d_in;
            let mut acc = Complex::new(T::zero(), T::zero());
            for (j, vj) in v.iter().enumerate() {
                acc = acc + Complex::new(mats.re[row + j], mats.im[row + j]) * vj;
            }
            dst[o * m + off] = acc;
        }
    }
    out
}

/// Gradients of `y = ifft3(mask(R . V))` given `g = fft3(dL/dy)`.
///
/// Returns `(R^H g` on retained modes, dL/dRe R, dL/dIm R)` with one matrix slot
/// per entry of `mats`.
fn adjoint_modes<T: Scalar>(
    g: &Spectrum<T>,
    cached: &Spectrum<T>,
    mats: &ModeMatrices<T>,
    slots: usize,
    dims: Dims,
) -> (Spectrum<T>, Vec<T>, Vec<T>) {
    let d_out = g.channels();
    let d_in = cached.channels();
    let m = g.modes_per_channel();
    let n = T::from_usize_lossy(dims[0] * dims[1] * dims[2]);
    let mut back = Spectrum::zeros(d_in, dims);
    let mut gre = vec![T::zero(); slots * d_out * d_in];
    let mut gim = vec![T::zero(); slots * d_out * d_in];
    let gsrc = g.data();
    let vsrc = cached.data();
    let bdst = back.data_mut();
    let mut gv = vec![Complex::new(T::zero(), T::zero()); d_out];
    let mut vv = vec![Complex::new(T::zero(), T::zero()); d_in];
    for &(off, slot, w) in &mats.modes {
        for (o, x) in gv.iter_mut().enumerate() {
            *x = gsrc[o * m + off];
        }
        for (j, x) in vv.iter_mut().enumerate() {
            *x = vsrc[j * m + off];
        }
        let base = slot * d_out * d_in;
        let scale = n * T::from_usize_lossy(w);
        for o in 0..d_out {
            let yb = gv[o] * scale;
            let row = base + o * d_in;
            for j in 0..d_in {
                let r = yb * vv[j].conj();
                gre[row + j] += r.re;
                gim[row + j] += r.im;
            }
        }
        for j in 0..d_in {
            let mut acc = Complex::new(T::zero(), T::zero());
            for o in 0..d_out {
                let row = base + o * d_in;
                acc = acc + Complex::new(mats.re[row + j], -mats.im[row + j]) * gv[o];
            }
            bdst[j * m + off] = acc;
        }
    }
    (back, gre, gim)
}

/// Forward pass of the shared-weight spectral convolution.
///
/// `re`/`im` are `d_out x d_in` row-major. Returns the output and the input
/// spectrum needed by [`spectral_shared_backward`].
pub fn spectral_shared_forward<T: Scalar>(
    v: &Field<T>,
    re: &[T],
    im: &[T],
    d_out: usize,
    mask: &ModeMask,
) -> Result<(Field<T>, Spectrum<T>)> {
    let dims = v.dims();
    check_weights(re, im, d_out * v.channels())?;
    let mats = shared_matrices(mask, dims, re, im)?;
    let spec = fft3(v)?;
    let y = ifft3(&apply_modes(&spec, &mats, d_out, dims), dims[2])?;
    Ok((y, spec))
}

/// Returns `(dL/dv, dL/dRe R, dL/dIm R)`.
pub fn spectral_shared_backward<T: Scalar>(
    grad_out: &Field<T>,
    cached: &Spectrum<T>,
    re: &[T],
    im: &[T],
    mask: &ModeMask,
) -> Result<(Field<T>, Vec<T>, Vec<T>)> {
    let dims = grad_out.dims();
    let mats = shared_matrices(mask, dims, re, im)?;
    let g = fft3(grad_out)?;
    let (back, gre, gim) = adjoint_modes(&g, cached, &mats, 1, dims);
    Ok((ifft3(&back, dims[2])?, gre, gim))
}

/// Forward pass of the per-mode spectral convolution.
///
/// `re`/`im` are `mask.table_len() x d_out x d_in`.
pub fn spectral_permode_forward<T: Scalar>(
    v: &Field<T>,
    re: &[T],
    im: &[T],
    d_out: usize,
    mask: &ModeMask,
) -> Result<(Field<T>, Spectrum<T>)> {
    let dims = v.dims();
    let dd = d_out * v.channels();
    check_weights(re, im, mask.table_len() * dd)?;
    let mats = permode_matrices(mask, dims, re, im, dd)?;
    let spec = fft3(v)?;
    let y = ifft3(&apply_modes(&spec, &mats, d_out, dims), dims[2])?;
    Ok((y, spec))
}

pub fn spectral_permode_backward<T: Scalar>(
    grad_out: &Field<T>,
    cached: &Spectrum<T>,
    re: &[T],
    im: &[T],
    mask: &ModeMask,
) -> Result<(Field<T>, Vec<T>, Vec<T>)> {
    let dims = grad_out.dims();
    let dd = grad_out.channels() * cached.channels();
    let mats = permode_matrices(mask, dims, re, im, dd)?;
    let g = fft3(grad_out)?;
    let (back, ere, eim) = adjoint_modes(&g, cached, &mats, mats.modes.len(), dims);
    // Scatter the effective-matrix gradients back onto the signed-frequency table.
    let half_t = T::from_f64_lossy(0.5);
    let mut gre = vec![T::zero(); re.len()];
    let mut gim = vec![T::zero(); im.len()];
    for (slot, k) in mask.retained(dims).into_iter().enumerate() {
        let (s, p) = mode_pair(k, dims);
        let a = mask.table_index(s) * dd;
        let b = mask.table_index(p) * dd;
        let e = slot * dd;
        for i in 0..dd {
            gre[a + i] += half_t * ere[e + i];
            gim[a + i] += half_t * eim[e + i];
            gre[b + i] += half_t * ere[e + i];
            gim[b + i] -= half_t * eim[e + i];
        }
    }
    Ok((ifft3(&back, dims[2])?, gre, gim))
}
