use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use fnoseg3d::train::{EvalReport, LossReport};

use crate::exit::CliError;

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn history_csv(history: &[LossReport]) -> String {
    let mut s = String::from("epoch,lr,train_loss,val_loss,val_wt,val_tc,val_et,val_mean\n");
    for r in history {
        let d = r.val_dice.as_ref();
        let _ = writeln!(
            s,
            "{},{:.8},{:.6},{},{},{},{},{}",
            r.epoch,
            r.lr,
            r.train_loss,
            num(r.val_loss),
            num(d.map(|d| d.wt)),
            num(d.map(|d| d.tc)),
            num(d.map(|d| d.et)),
            num(d.map(|d| d.mean)),
        );
    }
    s
}

pub fn eval_csv(report: &EvalReport) -> String {
    let mut s = String::from("id,wt,tc,et,mean\n");
    for r in &report.samples {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6}",
            r.id,
            r.wt,
            r.tc,
            r.et,
            (r.wt + r.tc + r.et) / 3.0
        );
    }
    let m = &report.summary;
    let _ = writeln!(s, "mean,{:.6},{:.6},{:.6},{:.6}", m.wt, m.tc, m.et, m.mean);
    s
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    fs::write(path, fnoseg3d::canonical::to_string_pretty(value)?)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)?;
    Ok(())
}
