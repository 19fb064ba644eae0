//! Report CSVs: per-fold rows and the aggregated summary, with readers
//! that round-trip what the writers emit.

use std::path::Path;

use crate::datasets::io::format_float;
use crate::error::{Error, Result};
use crate::experiments::cv::ExperimentReport;
use crate::experiments::metrics::mean_std;
use crate::experiments::scaling::ScalingReport;
use crate::experiments::sweep::SweepTable;

pub const FOLDS_HEADER: [&str; 11] =
    ["experiment", "family", "fold", "tp", "fp", "tn", "fn", "bal_acc", "sens", "spec", "chosen_hparams"];
pub const SUMMARY_HEADER: [&str; 4] = ["family", "metric", "mean", "std"];
pub const SCALING_HEADER: [&str; 7] =
    ["family", "size", "bal_acc", "sens", "spec", "test_hash", "aborted"];
pub const SWEEP_HEADER: [&str; 5] =
    ["keep_fraction", "arm", "mean_bal_acc", "std_bal_acc", "aborted_folds"];

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

/// One row per fold; aborted folds keep empty metric cells and carry
/// their reason inside the hyperparameter column.
pub fn write_folds_csv(path: &Path, reports: &[&ExperimentReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FOLDS_HEADER)?;
    for r in reports {
        for f in &r.folds {
            let chosen = match &f.aborted {
                Some(msg) => format!("{};aborted={}", f.chosen, sanitize(msg)),
                None => f.chosen.clone(),
            };
            let cells: [String; 11] = if f.aborted.is_some() {
                [
                    r.experiment.clone(),
                    r.family.as_str().to_string(),
                    f.fold.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    chosen,
                ]
            } else {
                [
                    r.experiment.clone(),
                    r.family.as_str().to_string(),
                    f.fold.to_string(),
                    f.tp.to_string(),
                    f.fp.to_string(),
                    f.tn.to_string(),
                    f.fn_.to_string(),
                    format_float(f.bal_acc),
                    format_float(f.sens),
                    format_float(f.spec),
                    chosen,
                ]
            };
            w.write_record(&cells)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, reports: &[&ExperimentReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        for s in &r.summary {
            w.write_record([
                r.family.as_str(),
                &s.metric,
                &format_float(s.mean),
                &format_float(s.std),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldRow {
    pub experiment: String,
    pub family: String,
    pub fold: usize,
    /// None for aborted folds.
    pub metrics: Option<FoldMetrics>,
    pub chosen: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub bal_acc: f64,
    pub sens: f64,
    pub spec: f64,
}

fn check_header(got: &csv::StringRecord, want: &[&str], what: &str) -> Result<()> {
    let got: Vec<&str> = got.iter().collect();
    if got != want {
        return Err(Error::Schema(format!("{what} header {got:?}, expected {want:?}")));
    }
    Ok(())
}

fn parse_count(s: &str, what: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Schema(format!("bad {what} count {s:?}")))
}

fn parse_float(s: &str, what: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Schema(format!("bad {what} value {s:?}")))
}

pub fn read_folds_csv(path: &Path) -> Result<Vec<FoldRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    check_header(reader.headers()?, &FOLDS_HEADER, "folds")?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let rec = record?;
        if rec.len() != FOLDS_HEADER.len() {
            return Err(Error::Schema(format!("folds row has {} cells", rec.len())));
        }
        let metrics = if rec[3].is_empty() {
            None
        } else {
            Some(FoldMetrics {
                tp: parse_count(&rec[3], "tp")?,
                fp: parse_count(&rec[4], "fp")?,
                tn: parse_count(&rec[5], "tn")?,
                fn_: parse_count(&rec[6], "fn")?,
                bal_acc: parse_float(&rec[7], "bal_acc")?,
                sens: parse_float(&rec[8], "sens")?,
                spec: parse_float(&rec[9], "spec")?,
            })
        };
        rows.push(FoldRow {
            experiment: rec[0].to_string(),
            family: rec[1].to_string(),
            fold: parse_count(&rec[2], "fold")?,
            metrics,
            chosen: rec[10].to_string(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub family: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    check_header(reader.headers()?, &SUMMARY_HEADER, "summary")?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let rec = record?;
        if rec.len() != SUMMARY_HEADER.len() {
            return Err(Error::Schema(format!("summary row has {} cells", rec.len())));
        }
        rows.push(SummaryRow {
            family: rec[0].to_string(),
            metric: rec[1].to_string(),
            mean: parse_float(&rec[2], "mean")?,
            std: parse_float(&rec[3], "std")?,
        });
    }
    Ok(rows)
}

/// Aggregates parsed fold rows back into summary rows, in (family,
/// metric) order of first appearance; aborted folds are skipped. This
/// is the reader-side counterpart of `write_summary_csv`.
pub fn summarize_fold_rows(rows: &[FoldRow]) -> Vec<SummaryRow> {
    let mut families: Vec<&str> = Vec::new();
    for r in rows {
        if !families.contains(&r.family.as_str()) {
            families.push(&r.family);
        }
    }
    let mut out = Vec::new();
    for family in families {
        let ok: Vec<&FoldMetrics> = rows
            .iter()
            .filter(|r| r.family == family)
            .filter_map(|r| r.metrics.as_ref())
            .collect();
        for (metric, xs) in [
            ("bal_acc", ok.iter().map(|m| m.bal_acc).collect::<Vec<_>>()),
            ("sens", ok.iter().map(|m| m.sens).collect::<Vec<_>>()),
            ("spec", ok.iter().map(|m| m.spec).collect::<Vec<_>>()),
        ] {
            let (mean, std) = mean_std(&xs);
            out.push(SummaryRow { family: family.to_string(), metric: metric.to_string(), mean, std });
        }
    }
    out
}

pub fn write_scaling_csv(path: &Path, reports: &[ScalingReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SCALING_HEADER)?;
    for r in reports {
        for p in &r.points {
            let (bal, sens, spec) = if p.aborted.is_some() {
                (String::new(), String::new(), String::new())
            } else {
                (format_float(p.bal_acc), format_float(p.sens), format_float(p.spec))
            };
            w.write_record([
                r.family.as_str(),
                &p.size.to_string(),
                &bal,
                &sens,
                &spec,
                &p.test_hash,
                &p.aborted.as_deref().map(sanitize).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, table: &SweepTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_HEADER)?;
    for row in &table.rows {
        w.write_record([
            &format_float(row.keep_fraction),
            row.arm,
            &format_float(row.mean_bal_acc),
            &format_float(row.std_bal_acc),
            &row.aborted_folds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
