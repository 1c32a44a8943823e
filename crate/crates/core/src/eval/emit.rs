//! Report files.
//!
//! * `table1.csv`: one row per model. Columns `model, mean_accuracy,
//!   mean_loss, std_accuracy, range_accuracy, mean_epochs, folds,
//!   failed_folds, reference_accuracy, reference_loss, config_hash, master_seed,
//!   tool_version`.
//! * `folds.csv`: one row per (model, fold). Columns `model, fold,
//!   test_subject, accuracy, loss, epochs_run, best_epoch, wall_time_s, seed,
//!   failed, config_hash`.
//! * `plotdata.dat`: whitespace columns `model fold accuracy loss epochs` for
//!   successful folds, after `#` comment lines with the provenance.
//! * `report.json`: the full [`BenchmarkReport`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::eval::reference::reference_for;
use crate::eval::run::BenchmarkReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    PlotData,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::PlotData];
}

#[derive(Serialize)]
struct TableRow<'a> {
    model: &'a str,
    mean_accuracy: Option<f64>,
    mean_loss: Option<f64>,
    std_accuracy: Option<f64>,
    range_accuracy: Option<f64>,
    mean_epochs: Option<f64>,
    folds: usize,
    failed_folds: usize,
    reference_accuracy: Option<f64>,
    reference_loss: Option<f64>,
    config_hash: &'a str,
    master_seed: u64,
    tool_version: &'a str,
}

#[derive(Serialize)]
struct FoldRow<'a> {
    model: &'a str,
    fold: usize,
    test_subject: u16,
    accuracy: f64,
    loss: f64,
    epochs_run: usize,
    best_epoch: usize,
    wall_time_s: f64,
    seed: u64,
    failed: bool,
    config_hash: &'a str,
}

pub fn table1_csv(report: &BenchmarkReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for a in &report.aggregates {
        let reference = reference_for(a.model);
        let s = a.stats.as_ref();
        w.serialize(TableRow {
            model: a.model.as_str(),
            mean_accuracy: s.map(|s| s.mean_accuracy),
            mean_loss: s.map(|s| s.mean_loss),
            std_accuracy: s.map(|s| s.std_accuracy),
            range_accuracy: s.map(|s| s.range_accuracy),
            mean_epochs: s.map(|s| s.mean_epochs),
            folds: a.attempted - a.failed,
            failed_folds: a.failed,
            reference_accuracy: reference.as_ref().map(|r| r.accuracy),
            reference_loss: reference.as_ref().map(|r| r.loss),
            config_hash: &report.config_hash,
            master_seed: report.config.train.master_seed,
            tool_version: &report.tool_version,
        })?;
    }
    w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))
}

pub fn folds_csv(report: &BenchmarkReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for f in &report.folds {
        w.serialize(FoldRow {
            model: f.model.as_str(),
            fold: f.fold,
            test_subject: f.test_subject.0,
            accuracy: f.accuracy,
            loss: f.loss,
            epochs_run: f.epochs_run,
            best_epoch: f.best_epoch,
            wall_time_s: f.wall_time_s,
            seed: f.seed,
            failed: !f.succeeded(),
            config_hash: &f.config_hash,
        })?;
    }
    w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))
}

pub fn plotdata(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash {}", report.config_hash);
    let _ = writeln!(out, "# master_seed {}", report.config.train.master_seed);
    let _ = writeln!(out, "# tool_version {}", report.tool_version);
    let _ = writeln!(out, "# model fold accuracy loss epochs");
    for f in report.folds.iter().filter(|f| f.succeeded()) {
        let _ = writeln!(out, "{} {} {} {} {}", f.model, f.fold, f.accuracy, f.loss, f.epochs_run);
    }
    out
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the requested formats into `dir` (created if needed) and returns
/// the paths written.
pub fn emit_report(report: &BenchmarkReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            ReportFormat::Csv => {
                written.push(write(dir.join("table1.csv"), &table1_csv(report)?)?);
                written.push(write(dir.join("folds.csv"), &folds_csv(report)?)?);
            }
            ReportFormat::Json => {
                let mut json = serde_json::to_vec_pretty(report)?;
                json.push(b'\n');
                written.push(write(dir.join("report.json"), &json)?);
            }
            ReportFormat::PlotData => written.push(write(dir.join("plotdata.dat"), plotdata(report).as_bytes())?),
        }
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<BenchmarkReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Text table of measured means next to the published ones.
pub fn render_summary(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<11} {:>6} {:>7} {:>6} {:>6} {:>7} {:>6} {:>6} {:>7} {:>6}",
        "model", "acc%", "loss", "std", "range", "epochs", "folds", "ref", "Δacc", "ref"
    );
    let _ = writeln!(
        out,
        "{:<11} {:>6} {:>7} {:>6} {:>6} {:>7} {:>6} {:>6} {:>7} {:>6}",
        "", "", "", "", "", "", "", "acc%", "", "loss"
    );
    for a in &report.aggregates {
        let r = reference_for(a.model);
        let (pa, pl) = r.as_ref().map_or((f64::NAN, f64::NAN), |r| (r.accuracy, r.loss));
        match &a.stats {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "{:<11} {:>6.2} {:>7.4} {:>6.2} {:>6.2} {:>7.1} {:>3}/{:<2} {:>6.1} {:>+7.2} {:>6.2}",
                    a.model.as_str(),
                    s.mean_accuracy,
                    s.mean_loss,
                    s.std_accuracy,
                    s.range_accuracy,
                    s.mean_epochs,
                    s.folds,
                    a.attempted,
                    pa,
                    s.mean_accuracy - pa,
                    pl
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{:<11} all {} folds failed {:>36.1} {:>14.2}",
                    a.model.as_str(),
                    a.attempted,
                    pa,
                    pl
                );
            }
        }
    }
    let failed = report.folds.iter().filter(|f| !f.succeeded()).count();
    if failed > 0 {
        let _ = writeln!(out, "WARNING: {failed} fold(s) failed and are excluded from the means");
    }
    let _ = writeln!(out, "std is the population standard deviation over folds");
    out
}
