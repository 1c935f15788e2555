//! Trajectory CSV, field snapshot CSV and the JSON drift report.

use std::fs;
use std::path::Path;

use geomech::epdiff1d::FieldSnapshot;
use serde::Serialize;
use serde_json::Value;

use crate::config::OutputSection;
use crate::error::CliError;
use crate::scenario::Outcome;

#[derive(Debug, Serialize)]
struct InvariantEntry<'a> {
    name: &'a str,
    initial: f64,
    max_abs_drift: f64,
    max_rel_drift: f64,
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    system: &'a str,
    invariants: Vec<InvariantEntry<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a Value>,
    wall_time_seconds: f64,
}

/// 17 significant digits.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| io_error(path, e)),
        _ => Ok(()),
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_value(*v))).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn write_snapshot(path: &Path, s: &FieldSnapshot) -> Result<(), CliError> {
    let header = ["x", "m", "u"].map(String::from);
    let rows = (0..s.x.len()).map(|i| vec![s.x[i], s.m[i], s.u[i]]);
    write_csv(path, &header, rows)
}

pub fn report_json(outcome: &Outcome, wall_time_seconds: f64) -> String {
    let report = Report {
        system: outcome.kind.name(),
        invariants: outcome
            .invariants
            .entries
            .iter()
            .map(|e| InvariantEntry {
                name: &e.name,
                initial: e.initial,
                max_abs_drift: e.max_abs_drift,
                max_rel_drift: e.max_rel_drift,
            })
            .collect(),
        summary: outcome.summary.as_ref(),
        wall_time_seconds,
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_all(outcome: &Outcome, outputs: &OutputSection, wall_time_seconds: f64) -> Result<(), CliError> {
    write_csv(&outputs.trajectory_path, &outcome.columns, outcome.rows.iter().cloned())?;
    if let (Some(path), Some(snap)) = (&outputs.snapshot_path, &outcome.snapshot) {
        write_snapshot(path, snap)?;
    }
    let path = &outputs.report_path;
    create_parent(path)?;
    fs::write(path, report_json(outcome, wall_time_seconds)).map_err(|e| io_error(path, e))
}
