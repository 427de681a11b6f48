//! Pointwise layers: channel-mixing linear map, layer norm, SELU, softmax.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::field::{lane_dot, lane_sum};
use crate::tensor::Field;

pub const SELU_ALPHA: f64 = 1.6732632423543772;
pub const SELU_LAMBDA: f64 = 1.0507009873554805;
pub const LN_EPS: f64 = 1e-5;

/// `y = W v + b` at every voxel. `w` is `d_out x d_in` row-major.
pub fn pointwise_linear<T: Scalar>(v: &Field<T>, w: &[T], b: &[T], d_out: usize) -> Result<Field<T>> {
    let d_in = v.channels();
    if w.len() != d_out * d_in {
        return Err(Error::ChannelMismatch {
            expected: w.len() / d_out.max(1),
            found: d_in,
        });
    }
    if b.len() != d_out {
        return Err(Error::shape(format!("bias of length {d_out}"), b.len()));
    }
    let mut y = v.apply_channel_matrix(w, d_out)?;
    for (o, &bo) in b.iter().enumerate() {
        if bo != T::zero() {
            y.channel_mut(o).iter_mut().for_each(|x| *x += bo);
        }
    }
    Ok(y)
}

/// Returns `(dL/dv, dL/dW, dL/db)`.
pub fn pointwise_linear_backward<T: Scalar>(g: &Field<T>, v: &Field<T>, w: &[T]) -> (Field<T>, Vec<T>, Vec<T>) {
    let d_out = g.channels();
    let d_in = v.channels();
    let mut gw = vec![T::zero(); d_out * d_in];
    for o in 0..d_out {
        let go = g.channel(o);
        for i in 0..d_in {
            gw[o * d_in + i] = lane_dot(go, v.channel(i));
        }
    }
    let gb = (0..d_out).map(|o| lane_sum(g.channel(o))).collect();
    // W^T g
    let mut wt = vec![T::zero(); d_in * d_out];
    for o in 0..d_out {
        for i in 0..d_in {
            wt[i * d_out + o] = w[o * d_in + i];
        }
    }
    let gv = g.apply_channel_matrix(&wt, d_in).expect("transposed weight shape");
    (gv, gw, gb)
}

/// Cached statistics of one layer-norm application.
#[derive(Clone, Debug)]
pub struct LayerNormCache<T> {
    pub normalized: Field<T>,
    pub inv_std: T,
}

/// Standardizes over all channels and voxels jointly, then applies a
/// per-channel affine map.
pub fn layer_norm<T: Scalar>(v: &Field<T>, gamma: &[T], beta: &[T]) -> Result<(Field<T>, LayerNormCache<T>)> {
    let d = v.channels();
    if gamma.len() != d || beta.len() != d {
        return Err(Error::ChannelMismatch {
            expected: gamma.len(),
            found: d,
        });
    }
    let count = T::from_usize_lossy(v.len());
    let mean = v.sum() / count;
    let var = v.data().iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / count;
    let inv_std = T::one() / (var + T::from_f64_lossy(LN_EPS)).sqrt();
    let normalized = v.map(|x| (x - mean) * inv_std);
    let mut y = normalized.clone();
    for c in 0..d {
        let (g, b) = (gamma[c], beta[c]);
        y.channel_mut(c).iter_mut().for_each(|x| *x = g * *x + b);
    }
    Ok((y, LayerNormCache { normalized, inv_std }))
}

/// Returns `(dL/dv, dL/dgamma, dL/dbeta)`.
pub fn layer_norm_backward<T: Scalar>(
    g: &Field<T>,
    cache: &LayerNormCache<T>,
    gamma: &[T],
) -> (Field<T>, Vec<T>, Vec<T>) {
    let d = g.channels();
    let xhat = &cache.normalized;
    let mut ggamma = vec![T::zero(); d];
    let mut gbeta = vec![T::zero(); d];
    let mut gx = g.clone();
    for c in 0..d {
        let gc = g.channel(c);
        ggamma[c] = lane_dot(gc, xhat.channel(c));
        gbeta[c] = lane_sum(gc);
        gx.channel_mut(c).iter_mut().for_each(|x| *x *= gamma[c]);
    }
    let count = T::from_usize_lossy(g.len());
    let mean_g = gx.sum() / count;
    let mean_gx = gx.dot(xhat).expect("same shape") / count;
    let inv = cache.inv_std;
    for (o, &xh) in gx.data_mut().iter_mut().zip(xhat.data()) {
        *o = inv * (*o - mean_g - xh * mean_gx);
    }
    (gx, ggamma, gbeta)
}

#[inline]
pub fn selu_scalar<T: Scalar>(x: T) -> T {
    let lambda = T::from_f64_lossy(SELU_LAMBDA);
    if x > T::zero() {
        lambda * x
    } else {
        lambda * T::from_f64_lossy(SELU_ALPHA) * x.exp_m1()
    }
}

pub fn selu<T: Scalar>(v: &Field<T>) -> Field<T> {
    v.map(selu_scalar)
}

pub fn selu_backward<T: Scalar>(g: &Field<T>, v: &Field<T>) -> Field<T> {
    let lambda = T::from_f64_lossy(SELU_LAMBDA);
    let la = lambda * T::from_f64_lossy(SELU_ALPHA);
    g.zip_map(v, |gi, x| if x > T::zero() { gi * lambda } else { gi * la * x.exp() })
        .expect("same shape")
}

/// Per-voxel softmax across channels, max-subtracted.
pub fn softmax_channels<T: Scalar>(v: &Field<T>) -> Field<T> {
    let l = v.channels();
    let mut m = v.channel(0).to_vec();
    for c in 1..l {
        m.iter_mut().zip(v.channel(c)).for_each(|(a, &b)| *a = a.max(b));
    }
    let mut out = v.clone();
    let mut sum = vec![T::zero(); m.len()];
    for c in 0..l {
        let ch = out.channel_mut(c);
        ch.iter_mut().zip(&m).for_each(|(x, &mx)| *x -= mx);
        T::exp_in_place(ch);
        sum.iter_mut().zip(ch.iter()).for_each(|(s, &e)| *s += e);
    }
    sum.iter_mut().for_each(|s| *s = T::one() / *s);
    for c in 0..l {
        out.channel_mut(c).iter_mut().zip(&sum).for_each(|(x, &r)| *x *= r);
    }
    out
}

/// Backward through softmax given its output `s`.
pub fn softmax_backward<T: Scalar>(g: &Field<T>, s: &Field<T>) -> Field<T> {
    let l = s.channels();
    let mut dot = vec![T::zero(); s.voxels()];
    for c in 0..l {
        dot.iter_mut()
            .zip(g.channel(c).iter().zip(s.channel(c)))
            .for_each(|(d, (&gi, &si))| *d += gi * si);
    }
    let mut out = Field::zeros(l, s.dims());
    for c in 0..l {
        out.channel_mut(c)
            .iter_mut()
            .zip(g.channel(c).iter().zip(s.channel(c)).zip(&dot))
            .for_each(|(o, ((&gi, &si), &d))| *o = si * (gi - d));
    }
    out
}
