//! Resolution-robustness experiment: every variant is trained on inputs
//! downsampled by each factor and tested at native resolution.

use serde::{Deserialize, Serialize};

use crate::data::VolumeSample;
use crate::error::Result;
use crate::model::{Model, ModelConfig, Variant};
use crate::scalar::Scalar;
use crate::train::{evaluate, train_loop, DiceSummary, LossReport, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub factors: Vec<usize>,
    pub variants: Vec<Variant>,
    /// Use the laptop-scale width/depth/mode presets.
    pub desk: bool,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn model_config(&self, variant: Variant) -> ModelConfig {
        let c = variant.config();
        let c = if self.desk { c.desk() } else { c };
        c.with_seed(self.train.seed)
    }
}

/// One table cell. `dice` is `None` when the cell failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub factor: usize,
    pub variant: Variant,
    pub params: usize,
    pub best_epoch: Option<usize>,
    pub dice: Option<DiceSummary>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub cells: Vec<Cell>,
}

impl RobustnessTable {
    pub fn get(&self, factor: usize, variant: Variant) -> Option<&Cell> {
        self.cells.iter().find(|c| c.factor == factor && c.variant == variant)
    }

    pub fn mean_dice(&self, factor: usize, variant: Variant) -> Option<f64> {
        self.get(factor, variant)?.dice.as_ref().map(|d| d.mean)
    }

    /// Mean Dice lost when training at `factor` instead of 1.
    pub fn drop(&self, factor: usize, variant: Variant) -> Option<f64> {
        Some(self.mean_dice(1, variant)? - self.mean_dice(factor, variant)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("factor,variant,status,params,best_epoch,wt,tc,et,mean,drop\n");
        for c in &self.cells {
            let num = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            let d = c.dice.as_ref();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.factor,
                c.variant,
                if c.dice.is_some() { "ok" } else { "failed" },
                c.params,
                c.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
                num(d.map(|d| d.wt)),
                num(d.map(|d| d.tc)),
                num(d.map(|d| d.et)),
                num(d.map(|d| d.mean)),
                num(self.drop(c.factor, c.variant)),
            ));
        }
        out
    }
}

/// Progress events, in the order they happen.
pub enum Event<'a> {
    CellStart {
        factor: usize,
        variant: Variant,
    },
    Epoch {
        factor: usize,
        variant: Variant,
        report: &'a LossReport,
    },
    CellDone(&'a Cell),
}

fn run_cell<T: Scalar>(
    cfg: &ExperimentConfig,
    factor: usize,
    variant: Variant,
    data: [&[VolumeSample]; 3],
    on_event: &mut dyn FnMut(Event),
) -> Result<(usize, usize, DiceSummary)> {
    let model = Model::<T>::build(&cfg.model_config(variant))?;
    let tc = TrainConfig {
        train_factor: factor,
        ..cfg.train.clone()
    };
    let out = train_loop(model, data[0], data[1], &tc, |report| {
        on_event(Event::Epoch {
            factor,
            variant,
            report,
        })
    })?;
    let report = evaluate(&out.best, data[2], 1)?;
    Ok((out.best.param_count(), out.best_epoch, report.summary))
}

/// Runs every factor x variant cell. A failing cell is recorded and the
/// remaining cells still run.
pub fn run_experiment<T: Scalar>(
    cfg: &ExperimentConfig,
    train: &[VolumeSample],
    val: &[VolumeSample],
    test: &[VolumeSample],
    mut on_event: impl FnMut(Event),
) -> RobustnessTable {
    let mut table = RobustnessTable::default();
    for &factor in &cfg.factors {
        for &variant in &cfg.variants {
            on_event(Event::CellStart { factor, variant });
            let cell = match run_cell::<T>(cfg, factor, variant, [train, val, test], &mut on_event) {
                Ok((params, best_epoch, dice)) => Cell {
                    factor,
                    variant,
                    params,
                    best_epoch: Some(best_epoch),
                    dice: Some(dice),
                    error: None,
                },
                Err(e) => Cell {
                    factor,
                    variant,
                    params: crate::model::param_count_for(&cfg.model_config(variant)).total,
                    best_epoch: None,
                    dice: None,
                    error: Some(e.to_string()),
                },
            };
            on_event(Event::CellDone(&cell));
            table.cells.push(cell);
        }
    }
    table
}
