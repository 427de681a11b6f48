use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::field::{lane_dot, lane_sum};
use crate::tensor::Field;

pub const PCC_EPS: f64 = 1e-7;
const DICE_SMOOTH: f64 = 1e-5;
const CE_FLOOR: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Pcc,
    Dice,
    WeightedCe,
}

/// Loss value with its gradient with respect to the prediction scores.
#[derive(Clone, Debug)]
pub struct LossGrad<T> {
    pub value: f64,
    /// Per-label correlation terms `0.5 (r_l + 1)` (PCC only).
    pub per_label: Vec<f64>,
    pub grad: Field<T>,
}

fn check<T: Scalar>(pred: &Field<T>, truth: &Field<T>) -> Result<()> {
    if !pred.same_shape(truth) {
        return Err(Error::shape(truth.shape_string(), pred.shape_string()));
    }
    Ok(())
}

pub fn loss<T: Scalar>(kind: LossKind, pred: &Field<T>, truth: &Field<T>) -> Result<LossGrad<T>> {
    match kind {
        LossKind::Pcc => pcc_loss(pred, truth),
        LossKind::Dice => dice_loss(pred, truth),
        LossKind::WeightedCe => weighted_ce_loss(pred, truth),
    }
}

/// `1 - mean_l 0.5 (r_l + 1)` with `r_l` the Pearson correlation of label
/// `l`'s scores and one-hot truth over all voxels, `eps` inside the root.
pub fn pcc_loss<T: Scalar>(pred: &Field<T>, truth: &Field<T>) -> Result<LossGrad<T>> {
    check(pred, truth)?;
    let l = pred.channels();
    let n = pred.voxels();
    let count = T::from_usize_lossy(n);
    let eps = T::from_f64_lossy(PCC_EPS);
    let half_over_l = T::from_f64_lossy(0.5 / l as f64);
    let mut grad = Field::zeros(l, pred.dims());
    let mut per_label = Vec::with_capacity(l);
    let mut a = vec![T::zero(); n];
    let mut b = vec![T::zero(); n];
    for c in 0..l {
        let (p, y) = (pred.channel(c), truth.channel(c));
        let pm = lane_sum(p) / count;
        let ym = lane_sum(y) / count;
        for i in 0..n {
            a[i] = p[i] - pm;
            b[i] = y[i] - ym;
        }
        let sab = lane_dot(&a, &b);
        let saa = lane_dot(&a, &a);
        let sbb = lane_dot(&b, &b);
        let den2 = saa * sbb + eps;
        let den = den2.sqrt();
        let r = sab / den;
        per_label.push(0.5 * (r.as_f64() + 1.0));
        // dr/dp_i = b_i / den - sab sbb a_i / den^3
        let cb = -half_over_l / den;
        let ca = half_over_l * sab * sbb / (den2 * den);
        for (g, (&ai, &bi)) in grad.channel_mut(c).iter_mut().zip(a.iter().zip(&b)) {
            *g = cb * bi + ca * ai;
        }
    }
    let value = 1.0 - per_label.iter().sum::<f64>() / l as f64;
    Ok(LossGrad { value, per_label, grad })
}

/// Soft Dice loss `1 - mean_l (2 sum p y + s) / (sum p + sum y + s)`.
pub fn dice_loss<T: Scalar>(pred: &Field<T>, truth: &Field<T>) -> Result<LossGrad<T>> {
    check(pred, truth)?;
    let l = pred.channels();
    let s = T::from_f64_lossy(DICE_SMOOTH);
    let two = T::from_f64_lossy(2.0);
    let inv_l = T::from_f64_lossy(1.0 / l as f64);
    let mut grad = Field::zeros(l, pred.dims());
    let mut total = 0.0;
    for c in 0..l {
        let (p, y) = (pred.channel(c), truth.channel(c));
        let inter = lane_dot(p, y);
        let den = lane_sum(p) + lane_sum(y) + s;
        let num = two * inter + s;
        total += (num / den).as_f64();
        let g_den = num / (den * den);
        for (g, &yi) in grad.channel_mut(c).iter_mut().zip(y) {
            *g = -inv_l * (two * yi / den - g_den);
        }
    }
    Ok(LossGrad {
        value: 1.0 - total / l as f64,
        per_label: Vec::new(),
        grad,
    })
}

/// Cross-entropy with inverse-frequency label weights normalized to mean 1.
pub fn weighted_ce_loss<T: Scalar>(pred: &Field<T>, truth: &Field<T>) -> Result<LossGrad<T>> {
    check(pred, truth)?;
    let l = pred.channels();
    let n = pred.voxels() as f64;
    let raw: Vec<f64> = (0..l)
        .map(|c| 1.0 / (lane_sum(truth.channel(c)).as_f64() / n).max(1e-3))
        .collect();
    let norm = raw.iter().sum::<f64>() / l as f64;
    let floor = T::from_f64_lossy(CE_FLOOR);
    let mut grad = Field::zeros(l, pred.dims());
    let mut total = 0.0;
    for c in 0..l {
        let w = raw[c] / norm;
        let wt = T::from_f64_lossy(w / n);
        let (p, y) = (pred.channel(c), truth.channel(c));
        let mut acc = 0.0;
        for (g, (&pi, &yi)) in grad.channel_mut(c).iter_mut().zip(p.iter().zip(y)) {
            if yi != T::zero() {
                let q = pi.max(floor);
                acc += (yi * q.ln()).as_f64();
                *g = if pi > floor { -wt * yi / q } else { T::zero() };
            }
        }
        total -= w * acc / n;
    }
    Ok(LossGrad {
        value: total,
        per_label: Vec::new(),
        grad,
    })
}
