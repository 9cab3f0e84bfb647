//! Report files: JSON summaries, CSV snapshots, atomic writes.
//!
//! CSV schema for solution snapshots: header row
//! `t,grid_index,theta_or_coords,u`, comma separated, decimal point, 17
//! significant digits. JSON summaries embed the resolved configuration and
//! the crate version, and are byte-identical across reruns with the same
//! configuration and seed.

use std::io::Write;
use std::path::{Path, PathBuf};

use gmcf::field::SpaceTimeField;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;

/// One named assertion row of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    /// the asserted threshold, with its direction
    pub bound: f64,
    pub kind: CheckKind,
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// value must stay below bound
    UpperBound,
    /// value must stay above bound
    LowerBound,
    /// boolean outcome; value/bound carry context
    Flag,
}

impl Check {
    pub fn upper(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= bound && value.is_finite(),
            value,
            bound,
            kind: CheckKind::UpperBound,
        }
    }

    pub fn lower(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: value >= bound && value.is_finite(),
            value,
            bound,
            kind: CheckKind::LowerBound,
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool, value: f64) -> Self {
        Self {
            name: name.into(),
            pass,
            value,
            bound: 0.0,
            kind: CheckKind::Flag,
        }
    }
}

/// Experiment outcome: pass flag, summary JSON, artifact paths.
pub struct Outcome {
    pub experiment: &'static str,
    pub pass: bool,
    pub summary: Value,
    pub artifacts: Vec<PathBuf>,
    /// name of the first failing check, for the exit message
    pub first_failure: Option<String>,
}

pub fn summarize(
    experiment: &'static str,
    config: &Config,
    checks: &[Check],
    extra: Value,
) -> (bool, Value, Option<String>) {
    let pass = checks.iter().all(|c| c.pass);
    let first_failure = checks.iter().find(|c| !c.pass).map(|c| c.name.clone());
    let mut summary = json!({
        "experiment": experiment,
        "version": env!("CARGO_PKG_VERSION"),
        "pass": pass,
        "seed": config.run.seed,
        "checks": checks,
        "config": serde_json::to_value(config).expect("config serializes"),
    });
    if let Value::Object(map) = &mut summary {
        if let Value::Object(extra_map) = extra {
            for (k, v) in extra_map {
                map.insert(k, v);
            }
        }
    }
    (pass, summary, first_failure)
}

/// Write bytes through a temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

pub fn write_json(path: &Path, value: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Solution snapshot CSV: one row per (time node, grid point).
pub fn solution_csv(field: &SpaceTimeField<f64>) -> String {
    let geom = &field.geom;
    let mut out = String::from("t,grid_index,theta_or_coords,u\n");
    for (j, &t) in field.times().iter().enumerate() {
        let slice = field.slice(j);
        for (i, &u) in slice.iter().enumerate() {
            let (a, b) = geom.point_coords(i);
            let coords = if geom.dim() == 1 {
                fmt17(a)
            } else {
                format!("{};{}", fmt17(a), fmt17(b))
            };
            out.push_str(&format!("{},{},{},{}\n", fmt17(t), i, coords, fmt17(u)));
        }
    }
    out
}

/// Generic numeric table CSV with a header row.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parsed snapshot CSV for plotting: rows of (t, grid_index, u).
pub struct SnapshotTable {
    pub times: Vec<f64>,
    pub grid: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn read_snapshot_csv(path: &Path) -> std::io::Result<SnapshotTable> {
    let text = std::fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 4 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("line {}: expected at least 4 columns", ln + 1),
            ));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("line {}: {e}", ln + 1),
                )
            })
        };
        times.push(parse(cells[0])?);
        grid.push(parse(cells[1])? as usize);
        values.push(parse(cells[cells.len() - 1])?);
    }
    Ok(SnapshotTable {
        times,
        grid,
        values,
    })
}
