//! File formats.
//!
//! * datasets: CSV with header `x_1..x_d,y` plus a JSON sidecar holding the
//!   generation metadata and the ground truth;
//! * fitted parameters: JSON `{k, d, blocks}`;
//! * traces and grid summaries: CSV, one row per record or cell.
//!
//! Floats are written in shortest round-trip form, so a reload reproduces
//! every value bit for bit. Columns ending in `_ms` carry wall-clock time and
//! the `created_unix_s` field of a summary carries the creation time; nothing
//! else in an output depends on the clock.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::CovariateLaw;
use crate::error::{Error, Result};
use crate::experiment::{GridResult, TracePoint};
use crate::model::{Dataset, ModelParams};
use crate::solvers::TraceRecord;

pub const SCHEMA_VERSION: u32 = 1;

/// Metadata written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub schema_version: u32,
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub sigma: f64,
    pub law: CovariateLaw,
    pub seed: u64,
    pub truth: ModelParams,
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 || (1e-4..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::input(format!("line {line}: cannot parse `{field}` as a number")))
}

pub fn dataset_to_csv(data: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=data.d()).map(|j| format!("x_{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.x(i).iter().map(|&v| fmt_f64(v)).collect();
        row.push(fmt_f64(data.y(i)));
        w.write_record(&row)?;
    }
    finish(w)
}

/// Parses a dataset CSV. The header must be `x_1..x_d,y`; `sigma` is not
/// stored in the CSV and is supplied by the caller.
pub fn dataset_from_csv(text: &str, sigma: f64) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let d = header.len().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| Error::input("dataset needs at least one covariate column and y"))?;
    for (j, h) in header.iter().enumerate() {
        let want = if j == d { "y".to_string() } else { format!("x_{}", j + 1) };
        if h.trim() != want {
            return Err(Error::input(format!("unexpected column `{h}` at position {}, expected `{want}`", j + 1)));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != d + 1 {
            return Err(Error::input(format!("line {line}: expected {} fields, found {}", d + 1, rec.len())));
        }
        for j in 0..d {
            xs.push(parse_f64(&rec[j], line)?);
        }
        ys.push(parse_f64(&rec[d], line)?);
    }
    Dataset::new(d, xs, ys, sigma)
}

pub fn read_dataset(path: &Path, sigma: f64) -> Result<Dataset> {
    dataset_from_csv(&fs::read_to_string(path)?, sigma)
}

pub fn read_sidecar(path: &Path) -> Result<DatasetSidecar> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Per-iteration solver trace: `iter,loss,time_ms,rel_error_log10`; the last
/// column is empty when no truth was available.
pub fn trace_to_csv(trace: &[TraceRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "loss", "time_ms", "rel_error_log10"])?;
    for t in trace {
        w.write_record([t.iteration.to_string(), fmt_f64(t.loss), fmt_f64(t.time_ms), fmt_opt(t.log10_rel_error)])?;
    }
    finish(w)
}

/// Trial-aggregated trace of one algorithm.
pub fn trace_points_to_csv(points: &[TracePoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "mean_time_ms", "median_log10_rel_error", "p90_log10_rel_error"])?;
    for p in points {
        w.write_record([p.iteration.to_string(), fmt_f64(p.mean_time_ms), fmt_f64(p.median_log10), fmt_f64(p.p90_log10)])?;
    }
    finish(w)
}

pub fn grid_to_csv(result: &GridResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "n",
        "d",
        "k",
        "algorithm",
        "trials",
        "successes",
        "success_rate",
        "median_log10_rel_error",
        "p90_log10_rel_error",
        "failures",
        "mean_time_ms",
    ])?;
    for c in &result.cells {
        w.write_record([
            c.n.to_string(),
            c.d.to_string(),
            c.k.to_string(),
            c.algorithm.to_string(),
            c.trials.to_string(),
            c.successes.to_string(),
            fmt_f64(c.success_rate),
            fmt_f64(c.median_log10),
            fmt_f64(c.p90_log10),
            c.failures.to_string(),
            fmt_f64(c.mean_time_ms),
        ])?;
    }
    finish(w)
}

/// Summary document: `{schema_version, created_unix_s, ...body}`.
pub fn summary_json<T: Serialize>(body: &T) -> Result<String> {
    let mut value = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "created_unix_s": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    let body = serde_json::to_value(body)?;
    match body {
        serde_json::Value::Object(map) => value.as_object_mut().expect("object").extend(map),
        other => {
            value["body"] = other;
        }
    }
    to_json_pretty(&value)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::input(e.to_string()))
}

/// Writes every `(name, contents)` pair under `dir`, or nothing if any write
/// fails. Files are staged under temporary names and renamed into place.
pub fn write_all_or_nothing(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::new();
    let result = (|| -> Result<()> {
        for (name, contents) in files {
            let tmp = dir.join(format!(".{name}.partial"));
            fs::write(&tmp, contents)?;
            staged.push((tmp, dir.join(name)));
        }
        for (tmp, dest) in &staged {
            fs::rename(tmp, dest)?;
        }
        Ok(())
    })();
    if result.is_err() {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
    }
    result
}
