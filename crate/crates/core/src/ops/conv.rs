//! Spatial convolutions: stride-2 resampling pair and the 3x3x3 "same" conv
//! used by the baseline network.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::field::{lane_dot, lane_sum};
use crate::tensor::{Dims, Field};

/// Output extent of [`conv3_down`] for an input extent.
pub fn down_dims(dims: Dims) -> Dims {
    [dims[0].div_ceil(2), dims[1].div_ceil(2), dims[2].div_ceil(2)]
}

fn check_down_input(dims: Dims) -> Result<()> {
    for (axis, &n) in dims.iter().enumerate() {
        if n < 2 {
            return Err(Error::DimensionTooSmall { axis, size: n, min: 2 });
        }
    }
    Ok(())
}

fn check_len<T>(what: &str, v: &[T], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::shape(format!("{what} of length {expected}"), v.len()));
    }
    Ok(())
}

/// How block indices past the end of an axis are treated.
#[derive(Clone, Copy, PartialEq)]
enum Edge {
    /// Clamp to the last slice.
    Replicate,
    /// Drop (read as zero, writes skipped).
    Crop,
}

#[inline]
fn taps(tap: usize) -> [usize; 3] {
    [tap >> 2, (tap >> 1) & 1, tap & 1]
}

/// Splits `v` into 2x2x2 blocks on the grid `blocks`. Row `c * 8 + tap` of
/// the result holds tap `tap` of channel `c` for every block.
fn gather_blocks<T: Scalar>(v: &Field<T>, blocks: Dims, edge: Edge) -> Field<T> {
    let dims = v.dims();
    let mut out = Field::zeros(v.channels() * 8, blocks);
    let bn = out.voxels();
    for c in 0..v.channels() {
        let src = v.channel(c);
        for tap in 0..8 {
            let [a, b, cz] = taps(tap);
            let dst = &mut out.data_mut()[(c * 8 + tap) * bn..(c * 8 + tap + 1) * bn];
            for x in 0..blocks[0] {
                let Some(sx) = edge_index(2 * x + a, dims[0], edge) else {
                    continue;
                };
                for y in 0..blocks[1] {
                    let Some(sy) = edge_index(2 * y + b, dims[1], edge) else {
                        continue;
                    };
                    let row = (sx * dims[1] + sy) * dims[2];
                    let drow = &mut dst[(x * blocks[1] + y) * blocks[2]..][..blocks[2]];
                    let inside = in_range(blocks[2], cz, dims[2]);
                    let srow = &src[row..row + dims[2]];
                    for (d, &s) in drow[..inside].iter_mut().zip(srow[cz..].iter().step_by(2)) {
                        *d = s;
                    }
                    if edge == Edge::Replicate {
                        drow[inside..].iter_mut().for_each(|d| *d = srow[dims[2] - 1]);
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`gather_blocks`]: accumulates block rows into a field.
fn scatter_blocks<T: Scalar>(rows: &Field<T>, dims: Dims, edge: Edge) -> Field<T> {
    let blocks = rows.dims();
    let channels = rows.channels() / 8;
    let bn = rows.voxels();
    let mut out = Field::zeros(channels, dims);
    for c in 0..channels {
        let dst = out.channel_mut(c);
        for tap in 0..8 {
            let [a, b, cz] = taps(tap);
            let src = &rows.data()[(c * 8 + tap) * bn..(c * 8 + tap + 1) * bn];
            for x in 0..blocks[0] {
                let Some(sx) = edge_index(2 * x + a, dims[0], edge) else {
                    continue;
                };
                for y in 0..blocks[1] {
                    let Some(sy) = edge_index(2 * y + b, dims[1], edge) else {
                        continue;
                    };
                    let row = (sx * dims[1] + sy) * dims[2];
                    let srow = &src[(x * blocks[1] + y) * blocks[2]..][..blocks[2]];
                    let inside = in_range(blocks[2], cz, dims[2]);
                    let drow = &mut dst[row..row + dims[2]];
                    for (d, &s) in drow[cz..].iter_mut().step_by(2).zip(&srow[..inside]) {
                        *d += s;
                    }
                    if edge == Edge::Replicate {
                        for &s in &srow[inside..] {
                            drow[dims[2] - 1] += s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Number of leading blocks whose tap `t` falls inside an axis of size `n`.
#[inline]
fn in_range(blocks: usize, t: usize, n: usize) -> usize {
    blocks.min((n + 1 - t) / 2)
}

#[inline]
fn edge_index(i: usize, n: usize, edge: Edge) -> Option<usize> {
    if i < n {
        Some(i)
    } else if edge == Edge::Replicate {
        Some(n - 1)
    } else {
        None
    }
}

fn transpose<T: Scalar>(m: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut t = vec![T::zero(); m.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}

/// `out[r][s] = sum_v a[r][v] * b[s][v]` over channel rows of two fields.
fn row_dots<T: Scalar>(a: &Field<T>, b: &Field<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(a.channels() * b.channels());
    for r in 0..a.channels() {
        let ar = a.channel(r);
        for s in 0..b.channels() {
            out.push(lane_dot(ar, b.channel(s)));
        }
    }
    out
}

fn channel_sums<T: Scalar>(g: &Field<T>) -> Vec<T> {
    (0..g.channels()).map(|o| lane_sum(g.channel(o))).collect()
}

/// Stride-2, 2x2x2 convolution. Odd axes are padded by replicating the last
/// slice. `kernel` is `d_out x d_in x 2 x 2 x 2`.
pub fn conv3_down<T: Scalar>(v: &Field<T>, kernel: &[T], bias: &[T], d_out: usize) -> Result<Field<T>> {
    let dims = v.dims();
    check_down_input(dims)?;
    let d_in = v.channels();
    check_len("kernel", kernel, d_out * d_in * 8)?;
    check_len("bias", bias, d_out)?;
    let blocks = gather_blocks(v, down_dims(dims), Edge::Replicate);
    let mut out = blocks.apply_channel_matrix(kernel, d_out)?;
    for (o, &b) in bias.iter().enumerate() {
        out.channel_mut(o).iter_mut().for_each(|x| *x += b);
    }
    Ok(out)
}

/// Returns `(dL/dv, dL/dkernel, dL/dbias)`.
pub fn conv3_down_backward<T: Scalar>(grad_out: &Field<T>, v: &Field<T>, kernel: &[T]) -> (Field<T>, Vec<T>, Vec<T>) {
    let d_out = grad_out.channels();
    let blocks = gather_blocks(v, grad_out.dims(), Edge::Replicate);
    let gk = row_dots(grad_out, &blocks);
    let kt = transpose(kernel, d_out, blocks.channels());
    let grows = grad_out
        .apply_channel_matrix(&kt, blocks.channels())
        .expect("kernel shape");
    (
        scatter_blocks(&grows, v.dims(), Edge::Replicate),
        gk,
        channel_sums(grad_out),
    )
}

fn check_target(input: Dims, target: Dims) -> Result<()> {
    for axis in 0..3 {
        let t = target[axis];
        let n = input[axis];
        if n == 0 || !(t == 2 * n || t + 1 == 2 * n) {
            return Err(Error::TargetSize {
                axis,
                input: n,
                target: t,
            });
        }
    }
    Ok(())
}

/// Stride-2, 2x2x2 transposed convolution cropped to `target`.
/// `kernel` is `d_in x d_out x 2 x 2 x 2`.
pub fn tconv3_up<T: Scalar>(v: &Field<T>, kernel: &[T], bias: &[T], d_out: usize, target: Dims) -> Result<Field<T>> {
    check_target(v.dims(), target)?;
    let d_in = v.channels();
    check_len("kernel", kernel, d_out * d_in * 8)?;
    check_len("bias", bias, d_out)?;
    let kt = transpose(kernel, d_in, d_out * 8);
    let rows = v.apply_channel_matrix(&kt, d_out * 8)?;
    let mut out = scatter_blocks(&rows, target, Edge::Crop);
    for (o, &b) in bias.iter().enumerate() {
        out.channel_mut(o).iter_mut().for_each(|x| *x += b);
    }
    Ok(out)
}

/// Returns `(dL/dv, dL/dkernel, dL/dbias)`.
pub fn tconv3_up_backward<T: Scalar>(grad_out: &Field<T>, v: &Field<T>, kernel: &[T]) -> (Field<T>, Vec<T>, Vec<T>) {
    let grows = gather_blocks(grad_out, v.dims(), Edge::Crop);
    let gk = row_dots(v, &grows);
    let gv = grows.apply_channel_matrix(kernel, v.channels()).expect("kernel shape");
    (gv, gk, channel_sums(grad_out))
}

/// 3x3x3 convolution, stride 1, zero padding, output the same size as the
/// input. `kernel` is `d_out x d_in x 3 x 3 x 3`.
pub fn conv3_same<T: Scalar>(v: &Field<T>, kernel: &[T], bias: &[T], d_out: usize) -> Result<Field<T>> {
    let dims = v.dims();
    let d_in = v.channels();
    check_len("kernel", kernel, d_out * d_in * 27)?;
    check_len("bias", bias, d_out)?;
    let mut out = Field::zeros(d_out, dims);
    let n = v.voxels();
    for o in 0..d_out {
        let dst = &mut out.data_mut()[o * n..(o + 1) * n];
        dst.iter_mut().for_each(|x| *x = bias[o]);
        for i in 0..d_in {
            let src = v.channel(i);
            for tap in 0..27 {
                let w = kernel[(o * d_in + i) * 27 + tap];
                if w == T::zero() {
                    continue;
                }
                for_each_shifted_row(dims, tap, |d, s, len| {
                    for (a, &b) in dst[d..d + len].iter_mut().zip(&src[s..s + len]) {
                        *a += w * b;
                    }
                });
            }
        }
    }
    Ok(out)
}

/// Visits `(dst, src, len)` row segments where `src = dst + offset(tap)`
/// stays inside the grid along the whole segment.
#[inline]
fn for_each_shifted_row(dims: Dims, tap: usize, mut f: impl FnMut(usize, usize, usize)) {
    let off = [
        (tap / 9) as isize - 1,
        ((tap / 3) % 3) as isize - 1,
        (tap % 3) as isize - 1,
    ];
    let range = |n: usize, o: isize| -> (usize, usize) {
        let lo = if o < 0 { 1 } else { 0 };
        let hi = if o > 0 { n.saturating_sub(1) } else { n };
        (lo, hi)
    };
    let (x0, x1) = range(dims[0], off[0]);
    let (y0, y1) = range(dims[1], off[1]);
    let (z0, z1) = range(dims[2], off[2]);
    if z1 <= z0 {
        return;
    }
    let sz0 = (z0 as isize + off[2]) as usize;
    for x in x0..x1 {
        let sx = (x as isize + off[0]) as usize;
        for y in y0..y1 {
            let sy = (y as isize + off[1]) as usize;
            let drow = (x * dims[1] + y) * dims[2];
            let srow = (sx * dims[1] + sy) * dims[2];
            f(drow + z0, srow + sz0, z1 - z0);
        }
    }
}

/// Returns `(dL/dv, dL/dkernel, dL/dbias)`.
pub fn conv3_same_backward<T: Scalar>(grad_out: &Field<T>, v: &Field<T>, kernel: &[T]) -> (Field<T>, Vec<T>, Vec<T>) {
    let dims = v.dims();
    let d_in = v.channels();
    let d_out = grad_out.channels();
    let n = v.voxels();
    let mut gv = Field::zeros(d_in, dims);
    let mut gk = vec![T::zero(); kernel.len()];
    let gb = channel_sums(grad_out);
    for o in 0..d_out {
        let g = grad_out.channel(o);
        for i in 0..d_in {
            let src = v.channel(i);
            let dst = &mut gv.data_mut()[i * n..(i + 1) * n];
            for tap in 0..27 {
                let kidx = (o * d_in + i) * 27 + tap;
                let w = kernel[kidx];
                let mut acc = T::zero();
                for_each_shifted_row(dims, tap, |d, s, len| {
                    let gs = &g[d..d + len];
                    acc += lane_dot(gs, &src[s..s + len]);
                    for (a, &b) in dst[s..s + len].iter_mut().zip(gs) {
                        *a += w * b;
                    }
                });
                gk[kidx] += acc;
            }
        }
    }
    (gv, gk, gb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_field(c: usize, dims: Dims, rng: &mut ChaCha8Rng) -> Field<f64> {
        Field::from_fn(c, dims, |_, _, _, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn averaging_kernel_on_constant_field() {
        let v = Field::<f64>::constant(1, [4, 6, 2], 3.0);
        let y = conv3_down(&v, &[0.125; 8], &[0.0], 1).unwrap();
        assert_eq!(y.dims(), [2, 3, 1]);
        assert!(y.data().iter().all(|&x| (x - 3.0).abs() < 1e-15));
    }

    #[test]
    fn corner_indicator_picks_corner() {
        let v = Field::<f64>::from_vec(1, [2, 2, 2], (1..=8).map(f64::from).collect()).unwrap();
        let mut k = [0.0; 8];
        k[0] = 1.0;
        let y = conv3_down(&v, &k, &[0.0], 1).unwrap();
        assert_eq!(y.dims(), [1, 1, 1]);
        assert_eq!(y.data()[0], 1.0);
    }

    #[test]
    fn down_matches_sliding_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (di, dout) = (2, 3);
        let v = rand_field(di, [4, 5, 3], &mut rng);
        let k: Vec<f64> = (0..dout * di * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..dout).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = conv3_down(&v, &k, &b, dout).unwrap();
        assert_eq!(y.dims(), [2, 3, 2]);
        // Oracle: explicit replication-padded copy, then plain nested loops.
        let p = Field::from_fn(di, [4, 6, 4], |c, x, yy, z| v.get(c, x.min(3), yy.min(4), z.min(2)));
        for o in 0..dout {
            for x in 0..2 {
                for yy in 0..3 {
                    for z in 0..2 {
                        let mut acc = b[o];
                        for i in 0..di {
                            for a in 0..2 {
                                for bb in 0..2 {
                                    for c in 0..2 {
                                        acc += k[(o * di + i) * 8 + a * 4 + bb * 2 + c]
                                            * p.get(i, 2 * x + a, 2 * yy + bb, 2 * z + c);
                                    }
                                }
                            }
                        }
                        assert!((acc - y.get(o, x, yy, z)).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn tconv_all_ones_on_constant_field() {
        let v = Field::<f64>::constant(1, [2, 3, 2], 1.5);
        let y = tconv3_up(&v, &[1.0; 8], &[0.0], 1, [4, 6, 4]).unwrap();
        assert!(y.data().iter().all(|&x| (x - 1.5).abs() < 1e-15));
        let z = tconv3_up(&Field::<f64>::zeros(1, [2, 2, 2]), &[1.0; 8], &[0.25], 1, [3, 4, 3]).unwrap();
        assert_eq!(z.dims(), [3, 4, 3]);
        assert!(z.data().iter().all(|&x| x == 0.25));
    }

    #[test]
    fn tconv_rejects_bad_target() {
        let v = Field::<f64>::zeros(1, [3, 3, 3]);
        assert!(matches!(
            tconv3_up(&v, &[1.0; 8], &[0.0], 1, [6, 4, 6]),
            Err(Error::TargetSize { axis: 1, .. })
        ));
    }

    #[test]
    fn down_and_up_are_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (di, dout) = (3, 2);
        let x = rand_field(di, [4, 6, 2], &mut rng);
        let y = rand_field(dout, [2, 3, 1], &mut rng);
        let k: Vec<f64> = (0..dout * di * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lhs = conv3_down(&x, &k, &vec![0.0; dout], dout).unwrap().dot(&y).unwrap();
        let rhs = x
            .dot(&tconv3_up(&y, &k, &vec![0.0; di], di, [4, 6, 2]).unwrap())
            .unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn conv3_same_matches_direct_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let v = rand_field(2, [3, 4, 5], &mut rng);
        let k: Vec<f64> = (0..2 * 2 * 27).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = conv3_same(&v, &k, &[0.1, -0.2], 2).unwrap();
        let at = |c: usize, x: isize, yy: isize, z: isize| -> f64 {
            if x < 0 || yy < 0 || z < 0 || x >= 3 || yy >= 4 || z >= 5 {
                0.0
            } else {
                v.get(c, x as usize, yy as usize, z as usize)
            }
        };
        for o in 0..2 {
            for x in 0..3 {
                for yy in 0..4 {
                    for z in 0..5 {
                        let mut acc = [0.1, -0.2][o];
                        for i in 0..2 {
                            for t in 0..27 {
                                let (a, b, c) =
                                    ((t / 9) as isize - 1, ((t / 3) % 3) as isize - 1, (t % 3) as isize - 1);
                                acc += k[(o * 2 + i) * 27 + t] * at(i, x as isize + a, yy as isize + b, z as isize + c);
                            }
                        }
                        assert!((acc - y.get(o, x, yy, z)).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
