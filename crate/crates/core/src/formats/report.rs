use std::fmt::Write as _;
use std::path::Path;

use super::{write_atomic, FormatError};
use crate::evaluation::EvalReport;
use crate::training::TrainLog;

pub const TRAIN_LOG_HEADER: &str = "epoch,loss,val_accuracy,seconds";

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_train_log(path: &Path, log: &TrainLog) -> Result<(), FormatError> {
    let mut out = format!("{TRAIN_LOG_HEADER}\n");
    for e in &log.epochs {
        writeln!(out, "{},{},{},{:.3}", e.epoch, e.loss, opt(e.val_accuracy), e.seconds).expect("String write");
    }
    write_atomic(path, out.as_bytes())
}

/// `subset,K,accuracy`; the subset is written as `<N` and an empty subset has
/// an empty accuracy.
pub fn write_topk_csv(path: &Path, report: &EvalReport) -> Result<(), FormatError> {
    let mut out = String::from("subset,K,accuracy\n");
    for e in &report.top_k {
        writeln!(out, "<{},{},{}", e.max_train_count, e.k, opt(e.accuracy)).expect("String write");
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_pr_csv(path: &Path, report: &EvalReport) -> Result<(), FormatError> {
    let mut out = String::from("threshold,precision,recall\n");
    for p in &report.pr.points {
        writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall).expect("String write");
    }
    write_atomic(path, out.as_bytes())
}

pub fn format_report(report: &EvalReport) -> String {
    let pct = |v: Option<f64>| v.map(|v| format!("{:6.2}%", 100.0 * v)).unwrap_or_else(|| "    n/a".into());
    let mut out = String::new();
    writeln!(out, "mode: {}", report.mode).ok();
    writeln!(out, "evaluation units: {}", report.units).ok();
    writeln!(out, "overall accuracy: {}", pct(Some(report.overall_accuracy)).trim()).ok();
    writeln!(out, "average precision: {:.4}", report.pr.average_precision).ok();
    let mut subsets: Vec<usize> = report.top_k.iter().map(|e| e.max_train_count).collect();
    subsets.dedup();
    for s in subsets {
        let entries: Vec<_> = report.top_k.iter().filter(|e| e.max_train_count == s).collect();
        let units = entries.first().map_or(0, |e| e.units);
        write!(out, "top@K on genres with <{s} training segments ({units} units):").ok();
        for e in entries {
            write!(out, "  K={} {}", e.k, pct(e.accuracy)).ok();
        }
        out.push('\n');
    }
    out
}

/// Writes `report.txt`, `topk.csv` and `pr.csv` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<(), FormatError> {
    write_atomic(&dir.join("report.txt"), format_report(report).as_bytes())?;
    write_topk_csv(&dir.join("topk.csv"), report)?;
    write_pr_csv(&dir.join("pr.csv"), report)
}
