use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use fnoseg3d::data::{generate_synthetic, DatasetManifest, Split, VolumeSample};
use fnoseg3d::experiment::{run_experiment, Event};
use fnoseg3d::gradsuite;
use fnoseg3d::model::{load_checkpoint, param_report, save_checkpoint, Model};
use fnoseg3d::ops::GradReport;
use fnoseg3d::train::{evaluate, train_loop};
use fnoseg3d::Scalar;

use crate::exit::CliError;
use crate::output::{eval_csv, history_csv, write_json, write_text};
use crate::run_config::{Precision, RunConfig};

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

struct Dataset {
    manifest: DatasetManifest,
    root: PathBuf,
}

impl Dataset {
    fn open(cfg: &RunConfig) -> Result<Self, CliError> {
        let path = cfg
            .manifest
            .clone()
            .ok_or_else(|| CliError::Config("no dataset manifest given (--manifest or \"manifest\")".into()))?;
        let manifest = DatasetManifest::load(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Dataset { manifest, root })
    }

    fn split(&self, split: Split) -> Result<Vec<VolumeSample>, CliError> {
        self.manifest
            .read_split(&self.root, split)
            .map_err(|e| CliError::Data(format!("{split:?} split: {e}")))
    }
}

pub fn synth_gen(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.synthetic.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let (manifest, path) = generate_synthetic(&cfg.synthetic, &cfg.out)?;
    println!(
        "wrote {} samples ({} train / {} val / {} test) and {}",
        manifest.entries.len(),
        manifest.indices(Split::Train).len(),
        manifest.indices(Split::Val).len(),
        manifest.indices(Split::Test).len(),
        path.display()
    );
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let data = Dataset::open(cfg)?;
    cfg.record(&cfg.out)?;
    match cfg.precision {
        Precision::F32 => train_with::<f32>(cfg, &data),
        Precision::F64 => train_with::<f64>(cfg, &data),
    }
}

fn train_with<T: Scalar>(cfg: &RunConfig, data: &Dataset) -> Result<(), CliError> {
    let train = data.split(Split::Train)?;
    let val = data.split(Split::Val)?;
    let test = data.split(Split::Test)?;
    let model = Model::<T>::build(&cfg.model_config())?;
    let params = model.param_count();
    let tc = cfg.train_config();
    let out = train_loop(model, &train, &val, &tc, |r| {
        let dice = r
            .val_dice
            .as_ref()
            .map(|d| format!("{:.4}", d.mean))
            .unwrap_or_else(|| "-".into());
        eprintln!(
            "epoch {:>3}  lr {:.5}  loss {:.5}  val dice {dice}",
            r.epoch, r.lr, r.train_loss
        );
    })?;
    save_checkpoint(&out.best, cfg.out.join("checkpoint.fnck"))?;
    write_text(&cfg.out.join("history.csv"), &history_csv(&out.history))?;
    let test_report = if test.is_empty() {
        None
    } else {
        Some(evaluate(&out.best, &test, 1)?)
    };
    if let Some(r) = &test_report {
        println!(
            "test dice (native): wt {:.4} tc {:.4} et {:.4} mean {:.4}",
            r.summary.wt, r.summary.tc, r.summary.et, r.summary.mean
        );
    }
    write_json(
        &cfg.out.join("results.json"),
        &json!({
            "model": cfg.model_config(),
            "params": params,
            "best_epoch": out.best_epoch,
            "history": out.history,
            "test": test_report,
        }),
    )
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path, split: SplitArg, factor: usize) -> Result<(), CliError> {
    if factor == 0 {
        return Err(CliError::Config("--factor must be >= 1".into()));
    }
    let data = Dataset::open(cfg)?;
    let samples = data.split(split.into())?;
    if samples.is_empty() {
        return Err(CliError::Data(format!("{split:?} split is empty")));
    }
    let report = match cfg.precision {
        Precision::F32 => {
            let m = load_checkpoint::<f32>(checkpoint)
                .map_err(|e| CliError::Data(format!("{}: {e}", checkpoint.display())))?;
            evaluate(&m, &samples, factor)?
        }
        Precision::F64 => {
            let m = load_checkpoint::<f64>(checkpoint)
                .map_err(|e| CliError::Data(format!("{}: {e}", checkpoint.display())))?;
            evaluate(&m, &samples, factor)?
        }
    };
    fs::create_dir_all(&cfg.out)?;
    let csv = eval_csv(&report);
    print!("{csv}");
    write_text(&cfg.out.join("eval.csv"), &csv)?;
    write_json(
        &cfg.out.join("results.json"),
        &json!({
            "checkpoint": checkpoint,
            "split": Split::from(split),
            "factor": factor,
            "summary": report.summary,
            "samples": report.samples,
        }),
    )
}

pub fn gradcheck(cfg: &RunConfig, ops: bool, model: bool) -> Result<(), CliError> {
    let mut rows: Vec<(GradReport, f64)> = Vec::new();
    if ops {
        for r in gradsuite::op_suite(cfg.seed)? {
            rows.push((r, gradsuite::OP_TOLERANCE));
        }
        rows.push((gradsuite::pcc_suite(cfg.seed)?, gradsuite::OP_TOLERANCE));
    }
    if model {
        let r = gradsuite::model_suite(&gradsuite::tiny_model_config(), cfg.seed)?;
        rows.push((r, gradsuite::MODEL_TOLERANCE));
    }
    let mut failed = Vec::new();
    for (r, tol) in &rows {
        let ok = r.passed(*tol);
        println!(
            "{:<28} max rel error {:.3e}  tol {:.0e}  {}",
            r.label,
            r.max_rel_error(),
            tol,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(r.label.clone());
        }
    }
    if !cfg.out.as_os_str().is_empty() {
        fs::create_dir_all(&cfg.out)?;
        let reports: Vec<_> = rows
            .iter()
            .map(|(r, tol)| json!({ "label": r.label, "tolerance": tol, "passed": r.passed(*tol), "entries": r.entries }))
            .collect();
        write_json(&cfg.out.join("gradcheck.json"), &reports)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Gradcheck(failed.join(", ")))
    }
}

pub fn param_count(cfg: &RunConfig, desk: bool) -> Result<(), CliError> {
    let rows = param_report(&cfg.variants, desk);
    for r in &rows {
        println!("{}: {} parameters", r.variant, r.total);
        if let (Some(reference), Some(g)) = (r.reference, r.relative_gap) {
            println!("  reference {reference}, gap {:+.2}%", 100.0 * g);
        }
        for (name, n) in &r.blocks {
            println!("  {name:<24} {n}");
        }
    }
    fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("param_count.json"), &rows)
}

pub fn experiment(cfg: &RunConfig, max_train: Option<usize>) -> Result<(), CliError> {
    cfg.validate()?;
    let data = Dataset::open(cfg)?;
    cfg.record(&cfg.out)?;
    let mut train = data.split(Split::Train)?;
    if let Some(n) = max_train {
        train.truncate(n);
    }
    let val = data.split(Split::Val)?;
    let test = data.split(Split::Test)?;
    if test.is_empty() {
        return Err(CliError::Data("test split is empty".into()));
    }
    let ec = cfg.experiment_config();
    let cells_dir = cfg.out.join("cells");
    let mut history = Vec::new();
    let mut on_event = |e: Event| match e {
        Event::CellStart { factor, variant } => {
            eprintln!("== {variant} @ factor {factor}");
            history.clear();
        }
        Event::Epoch { report, .. } => {
            eprintln!("  epoch {:>3} loss {:.5}", report.epoch, report.train_loss);
            history.push(report.clone());
        }
        Event::CellDone(cell) => {
            match (&cell.dice, &cell.error) {
                (Some(d), _) => eprintln!("  native dice {:.4}", d.mean),
                (None, Some(err)) => eprintln!("  FAILED: {err}"),
                _ => {}
            }
            let dir = cells_dir.join(format!("{}_f{}", cell.variant, cell.factor));
            if fs::create_dir_all(&dir).is_ok() {
                let _ = fs::write(dir.join("history.csv"), history_csv(&history));
            }
        }
    };
    let table = match cfg.precision {
        Precision::F32 => run_experiment::<f32>(&ec, &train, &val, &test, &mut on_event),
        Precision::F64 => run_experiment::<f64>(&ec, &train, &val, &test, &mut on_event),
    };
    let csv = table.to_csv();
    print!("{csv}");
    write_text(&cfg.out.join("robustness_table.csv"), &csv)?;
    let drops: Vec<_> = ec
        .factors
        .iter()
        .flat_map(|&f| ec.variants.iter().map(move |&v| (f, v)))
        .map(|(f, v)| json!({ "factor": f, "variant": v, "drop": table.drop(f, v) }))
        .collect();
    write_json(
        &cfg.out.join("results.json"),
        &json!({ "experiment": ec, "cells": table.cells, "drops": drops }),
    )
}
