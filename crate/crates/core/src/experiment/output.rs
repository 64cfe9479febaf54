//! Files written by experiment runs and the `trace` command.
//!
//! Everything here is a deterministic function of its input: maps are
//! ordered, floats use shortest round-trip formatting, and replicates are
//! written in index order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};

use super::ExperimentReport;
use crate::error::{Error, Result};
use crate::prequential::{DeltaTrace, SelectionOutcome};

const RECORDS_HEADER: [&str; 8] = [
    "replicate",
    "rule",
    "horizon",
    "d_n",
    "chosen",
    "correct",
    "tie",
    "mean_delta",
];

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_trace(dir: &Path, stem: &str, trace: &DeltaTrace<f64>) -> Result<()> {
    trace.write_csv(BufWriter::new(File::create(
        dir.join(format!("{stem}.csv")),
    )?))
}

/// Writes `summary.json`, `records.csv` and one CSV per retained trace into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let summary = json!({
        "config": report.config,
        "summaries": report.summaries,
        "aggregates": report.aggregates,
        "assertions": report.assertions,
        "passed": report.passed(),
    });
    write_json(&dir.join("summary.json"), &summary)?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("records.csv"))?));
    w.write_record(RECORDS_HEADER)?;
    for rec in &report.records {
        for o in &rec.outcomes {
            w.write_record([
                rec.replicate.to_string(),
                o.rule.to_string(),
                o.horizon.to_string(),
                o.d_n.to_string(),
                o.chosen.clone(),
                o.correct.to_string(),
                o.tie.to_string(),
                if o.deltas.count == 0 {
                    String::new()
                } else {
                    o.deltas.mean.to_string()
                },
            ])?;
        }
    }
    w.flush()?;

    for (stem, t) in report.traces.iter().chain(&report.replicate_traces) {
        write_trace(dir, stem, t)?;
    }
    Ok(())
}

/// Writes `trace.csv` and `summary.json` for a single two-model comparison.
pub fn write_trace_summary(
    trace: &DeltaTrace<f64>,
    selection: &SelectionOutcome<f64>,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trace(dir, "trace", trace)?;
    let summary = json!({
        "rule": trace.rule.id,
        "model_a": trace.model_a,
        "model_b": trace.model_b,
        "n": trace.len(),
        "cutoff": selection.cutoff,
        "d_n": selection.d_n,
        "chosen": selection.chosen,
        "chosen_id": selection.chosen_id,
    });
    write_json(&dir.join("summary.json"), &summary)
}

/// Reads a one-column CSV with header `x`.
pub fn read_data_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() != 1 || &headers[0] != "x" {
        return Err(Error::Config(format!(
            "{}: expected a single column with header `x`",
            path.display()
        )));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            rec[0]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::Config(format!(
                        "{}: row {}: `{}` is not a finite number",
                        path.display(),
                        i + 1,
                        &rec[0]
                    ))
                })
        })
        .collect()
}
