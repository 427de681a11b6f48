//! Batch-size-one training with best-validation selection, and evaluation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{loss, LossKind};
use super::metrics::{scores_dice, DiceSummary};
use super::optim::{adamax_step, cosine_lr, AdamaxState, ScheduleConfig};
use super::preprocess::{augment, downsample_sample, normalize_modality, AugmentConfig};
use crate::data::{one_hot, VolumeSample};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::ops::Tape;
use crate::scalar::Scalar;
use crate::seed;
use crate::tensor::Field;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub schedule: ScheduleConfig,
    /// `None` disables augmentation.
    pub augment: Option<AugmentConfig>,
    pub loss: LossKind,
    /// Training inputs are downsampled by this factor.
    pub train_factor: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            schedule: ScheduleConfig::default(),
            augment: Some(AugmentConfig::default()),
            loss: LossKind::Pcc,
            train_factor: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.epochs == 0 || self.epochs > self.schedule.total_epochs {
            return Err(Error::InvalidConfig(format!(
                "epochs {} must be in 1..={}",
                self.epochs, self.schedule.total_epochs
            )));
        }
        if self.train_factor == 0 {
            return Err(Error::InvalidFactor(0));
        }
        Ok(())
    }
}

/// Metrics of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub epoch: usize,
    pub lr: f64,
    /// Mean over samples of the combined (main plus auxiliary) loss.
    pub train_loss: f64,
    /// Mean per-label PCC terms of the main output over the epoch.
    pub train_pcc: Vec<f64>,
    pub val_loss: Option<f64>,
    pub val_dice: Option<DiceSummary>,
}

pub struct TrainOutcome<T> {
    /// Parameters of the epoch with the best validation Dice (the last epoch
    /// when there is no validation set).
    pub best: Model<T>,
    pub best_epoch: usize,
    pub last: Model<T>,
    pub history: Vec<LossReport>,
}

/// Normalized network input for a sample.
pub fn prepare_input<T: Scalar>(sample: &VolumeSample) -> Field<T> {
    normalize_modality(&sample.image).cast()
}

fn normalized(sample: &VolumeSample) -> VolumeSample {
    VolumeSample {
        image: normalize_modality(&sample.image),
        ..sample.clone()
    }
}

/// One forward/backward/update on a prepared sample. Returns the combined
/// loss and the main output's per-label terms.
fn step<T: Scalar>(
    model: &mut Model<T>,
    opt: &mut AdamaxState<T>,
    sample: &VolumeSample,
    kind: LossKind,
    lr: f64,
) -> Result<(f64, Vec<f64>)> {
    let truth = one_hot::<T>(&sample.labels, model.config().out_labels)?;
    let mut tape = Tape::new();
    let x = tape.input(sample.image.cast());
    let heads = model.record(&mut tape, x, true)?;
    let outputs: Vec<_> = std::iter::once(heads.main).chain(heads.aux.iter().copied()).collect();
    let weight = 1.0 / outputs.len() as f64;
    let mut total = 0.0;
    let mut per_label = Vec::new();
    let mut grads = Vec::with_capacity(outputs.len());
    for (k, &o) in outputs.iter().enumerate() {
        let lg = loss(kind, tape.value(o), &truth)?;
        total += weight * lg.value;
        if k == 0 {
            per_label = lg.per_label;
        }
        grads.push(lg.grad.scale(T::from_f64_lossy(weight)));
    }
    if !total.is_finite() {
        return Ok((total, per_label));
    }
    let seeds: Vec<_> = outputs.iter().copied().zip(grads.iter()).collect();
    model.params_mut().zero_grad();
    tape.backward(model.params_mut(), &seeds)?;
    adamax_step(model.params_mut(), opt, lr)?;
    Ok((total, per_label))
}

/// Loss and Dice of `model` on prepared samples at their own resolution.
fn validate<T: Scalar>(model: &Model<T>, samples: &[VolumeSample], kind: LossKind) -> Result<(f64, DiceSummary)> {
    let mut total = 0.0;
    let mut dice = Vec::with_capacity(samples.len());
    for s in samples {
        let out = model.forward(&s.image.cast(), false)?;
        let truth = one_hot::<T>(&s.labels, model.config().out_labels)?;
        total += loss(kind, &out.main, &truth)?.value;
        dice.push(scores_dice(&out.main, &s.labels)?);
    }
    Ok((total / samples.len() as f64, DiceSummary::from_samples(&dice)))
}

/// Trains `model` with batch size one. Every random choice derives from
/// `cfg.seed`, so identical inputs give bit-identical histories.
pub fn train_loop<T: Scalar>(
    model: Model<T>,
    train: &[VolumeSample],
    val: &[VolumeSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&LossReport),
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split has no samples".into()));
    }
    let train: Vec<VolumeSample> = train.iter().map(normalized).collect();
    let val: Vec<VolumeSample> = val
        .iter()
        .map(|s| downsample_sample(&normalized(s), cfg.train_factor))
        .collect::<Result<_>>()?;
    let mut model = model;
    let mut opt = AdamaxState::new(model.params());
    let mut best: Option<(f64, usize, Model<T>)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(epoch, &cfg.schedule)?;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seed::rng(cfg.seed, "train/order", &[epoch as u64]));
        let mut sum = 0.0;
        let mut pcc = Vec::new();
        for &i in &order {
            let s = &train[i];
            let s = match &cfg.augment {
                Some(a) => augment(
                    s,
                    a,
                    &mut seed::rng(cfg.seed, "train/augment", &[epoch as u64, i as u64]),
                ),
                None => s.clone(),
            };
            let s = downsample_sample(&s, cfg.train_factor)?;
            let (value, per_label) = step(&mut model, &mut opt, &s, cfg.loss, lr)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    sample: s.id.clone(),
                    value,
                });
            }
            sum += value;
            if pcc.is_empty() {
                pcc = vec![0.0; per_label.len()];
            }
            pcc.iter_mut().zip(&per_label).for_each(|(a, b)| *a += b);
        }
        let n = train.len() as f64;
        let (val_loss, val_dice) = if val.is_empty() {
            (None, None)
        } else {
            let (l, d) = validate(&model, &val, cfg.loss)?;
            (Some(l), Some(d))
        };
        let report = LossReport {
            epoch,
            lr,
            train_loss: sum / n,
            train_pcc: pcc.iter().map(|v| v / n).collect(),
            val_loss,
            val_dice: val_dice.clone(),
        };
        on_epoch(&report);
        history.push(report);
        let score = val_dice.map_or(f64::NEG_INFINITY, |d| d.mean);
        let improved = match &best {
            None => true,
            Some((b, _, _)) => score > *b || (val.is_empty()),
        };
        if improved {
            best = Some((score, epoch, model.clone()));
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best,
        best_epoch,
        last: model,
        history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDice {
    pub id: String,
    pub wt: f64,
    pub tc: f64,
    pub et: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub summary: DiceSummary,
    pub samples: Vec<SampleDice>,
}

/// Segments every sample at `factor`-downsampled resolution (1 = native) and
/// scores it against labels at that resolution.
pub fn evaluate<T: Scalar>(model: &Model<T>, samples: &[VolumeSample], factor: usize) -> Result<EvalReport> {
    let mut per = Vec::with_capacity(samples.len());
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let s = downsample_sample(&normalized(s), factor)?;
        let out = model.forward(&s.image.cast(), false)?;
        let d = scores_dice(&out.main, &s.labels)?;
        per.push(d);
        rows.push(SampleDice {
            id: s.id.clone(),
            wt: d[0],
            tc: d[1],
            et: d[2],
        });
    }
    Ok(EvalReport {
        summary: DiceSummary::from_samples(&per),
        samples: rows,
    })
}
