use serde::{Deserialize, Serialize};

use crate::data::{argmax_labels, LabelVolume, Region};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Field;

/// `2 |A & B| / (|A| + |B|)` of the masks selecting `region` labels; 1 when
/// both masks are empty.
pub fn dice_metric(pred: &LabelVolume, truth: &LabelVolume, region: &[u8]) -> Result<f64> {
    if pred.dims() != truth.dims() {
        return Err(Error::shape(
            format!("{:?}", truth.dims()),
            format!("{:?}", pred.dims()),
        ));
    }
    let (mut a, mut b, mut both) = (0usize, 0usize, 0usize);
    for (p, t) in pred.data().iter().zip(truth.data()) {
        let (ip, it) = (region.contains(p), region.contains(t));
        a += ip as usize;
        b += it as usize;
        both += (ip && it) as usize;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (a + b) as f64)
}

/// Dice of the three nested regions, in [`Region::ALL`] order.
pub fn region_dice(pred: &LabelVolume, truth: &LabelVolume) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (o, r) in out.iter_mut().zip(Region::ALL) {
        *o = dice_metric(pred, truth, r.labels())?;
    }
    Ok(out)
}

pub fn scores_dice<T: Scalar>(scores: &Field<T>, truth: &LabelVolume) -> Result<[f64; 3]> {
    region_dice(&argmax_labels(scores), truth)
}

/// Per-region Dice averaged over samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiceSummary {
    pub wt: f64,
    pub tc: f64,
    pub et: f64,
    pub mean: f64,
}

impl DiceSummary {
    pub fn from_samples(per_sample: &[[f64; 3]]) -> Self {
        if per_sample.is_empty() {
            return DiceSummary::default();
        }
        let n = per_sample.len() as f64;
        let avg = |k: usize| per_sample.iter().map(|d| d[k]).sum::<f64>() / n;
        let (wt, tc, et) = (avg(0), avg(1), avg(2));
        DiceSummary {
            wt,
            tc,
            et,
            mean: (wt + tc + et) / 3.0,
        }
    }
}
