//! Text formats: dataset input files, report and polygon CSV, and JSON
//! sweep configs and run metadata.
//!
//! Report CSV header (exact, one row per sweep cell, optionally followed by
//! a `ratio` column):
//!
//! ```text
//! mechanism,epsilon,dataset_kind,n,target_mean,trials,mse,normalized_mse,stderr,seed
//! ```
//!
//! Polygon CSV header: `polygon_id,vertex_index,x,y`. Measured values are
//! printed with 17 significant digits so re-parsing recovers them exactly.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::BallPolygon;
use crate::harness::{ExperimentConfig, MseReport, Preset};
use crate::mechanisms::{BoundedDataset, Mechanism};

pub const REPORT_HEADER: [&str; 10] = [
    "mechanism",
    "epsilon",
    "dataset_kind",
    "n",
    "target_mean",
    "trials",
    "mse",
    "normalized_mse",
    "stderr",
    "seed",
];

pub const RATIO_COLUMN: &str = "ratio";

pub const POLYGON_HEADER: [&str; 4] = ["polygon_id", "vertex_index", "x", "y"];

/// 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses one real per line. Blank lines are skipped; every other line must
/// hold a single finite decimal literal. Returns `(line_number, value)`.
pub fn parse_values(text: &str) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let v: f64 = s.parse().map_err(|_| Error::Parse { line, message: format!("not a number: {s:?}") })?;
        if !v.is_finite() {
            return Err(Error::Parse { line, message: format!("non-finite value {s:?}") });
        }
        out.push((line, v));
    }
    Ok(out)
}

/// Parses a dataset file and checks every value against the declared bounds.
pub fn read_dataset(text: &str, lower: f64, upper: f64) -> Result<BoundedDataset> {
    crate::mechanisms::check_bounds(lower, upper)?;
    let parsed = parse_values(text)?;
    if let Some((line, v)) = parsed.iter().find(|(_, v)| !(*v >= lower && *v <= upper)) {
        return Err(Error::Parse { line: *line, message: format!("value {v} outside [{lower}, {upper}]") });
    }
    BoundedDataset::new(parsed.into_iter().map(|(_, v)| v).collect(), lower, upper)
}

/// A report row with its optional `ratio` column.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub report: MseReport,
    pub ratio: Option<f64>,
}

pub fn write_reports_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let with_ratio = rows.iter().any(|r| r.ratio.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = REPORT_HEADER.to_vec();
    if with_ratio {
        header.push(RATIO_COLUMN);
    }
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let r = &row.report;
        let mut rec = vec![
            r.mechanism.clone(),
            r.epsilon.to_string(),
            r.dataset_kind.clone(),
            r.n.to_string(),
            format_f64(r.target_mean),
            r.trials.to_string(),
            format_f64(r.mse),
            format_f64(r.normalized_mse),
            format_f64(r.stderr),
            r.seed.to_string(),
        ];
        if with_ratio {
            rec.push(row.ratio.map(format_f64).unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let s = rec.get(i).ok_or_else(|| Error::Parse { line, message: format!("missing column {i}") })?;
    s.parse()
        .map_err(|_| Error::Parse { line, message: format!("bad value {s:?} in column {}", REPORT_HEADER.get(i).unwrap_or(&RATIO_COLUMN)) })
}

/// Parses a report CSV written by [`write_reports_csv`].
pub fn parse_reports_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?.clone();
    let with_ratio = match header.len() {
        10 => false,
        11 if &header[10] == RATIO_COLUMN => true,
        _ => return Err(Error::Parse { line: 1, message: format!("unexpected header {header:?}") }),
    };
    if header.iter().zip(REPORT_HEADER).any(|(a, b)| a != b) {
        return Err(Error::Parse { line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let report = MseReport {
            mechanism: field(&rec, 0, line)?,
            epsilon: field(&rec, 1, line)?,
            dataset_kind: field(&rec, 2, line)?,
            n: field(&rec, 3, line)?,
            target_mean: field(&rec, 4, line)?,
            trials: field(&rec, 5, line)?,
            mse: field(&rec, 6, line)?,
            normalized_mse: field(&rec, 7, line)?,
            stderr: field(&rec, 8, line)?,
            seed: field(&rec, 9, line)?,
        };
        let ratio = if with_ratio && !rec.get(10).unwrap_or("").is_empty() { Some(field(&rec, 10, line)?) } else { None };
        rows.push(ReportRow { report, ratio });
    }
    Ok(rows)
}

pub fn write_polygons_csv<W: Write>(polygons: &[(String, BallPolygon)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POLYGON_HEADER).map_err(csv_err)?;
    for (id, poly) in polygons {
        for (i, v) in poly.vertices().iter().enumerate() {
            w.write_record([id.clone(), i.to_string(), format_f64(v[0]), format_f64(v[1])]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a polygon CSV into `(polygon_id, vertices)` blocks in file order.
/// Vertex indices must count up from 0 within each block.
pub fn parse_polygons_csv(text: &str) -> Result<Vec<(String, Vec<[f64; 2]>)>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(POLYGON_HEADER) {
        return Err(Error::Parse { line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut out: Vec<(String, Vec<[f64; 2]>)> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 4 {
            return Err(Error::Parse { line, message: "expected 4 columns".into() });
        }
        let id = rec[0].to_string();
        let idx: usize = rec[1].parse().map_err(|_| Error::Parse { line, message: "bad vertex_index".into() })?;
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse { line, message: format!("bad coordinate {s:?}") })
        };
        let v = [parse(&rec[2])?, parse(&rec[3])?];
        match out.last_mut() {
            Some((last, verts)) if *last == id => {
                if idx != verts.len() {
                    return Err(Error::Parse { line, message: format!("vertex_index {idx} out of sequence") });
                }
                verts.push(v);
            }
            _ => {
                if idx != 0 {
                    return Err(Error::Parse { line, message: "polygon must start at vertex_index 0".into() });
                }
                out.push((id, vec![v]));
            }
        }
    }
    Ok(out)
}

/// Parses and validates a JSON sweep config.
pub fn parse_sweep_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Sidecar written next to every figure CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<'a> {
    pub tool: &'a str,
    pub version: &'a str,
    pub preset: Option<&'a str>,
    pub seed: u64,
    pub seed_source: &'a str,
    pub config: &'a ExperimentConfig,
    pub epsilon_grid: &'a [f64],
    pub mean_grid: &'a [f64],
    pub columns: Vec<&'a str>,
}

pub fn write_metadata<W: Write>(meta: &RunMetadata<'_>, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, meta)?;
    writeln!(out)?;
    Ok(())
}

/// Attaches the per-preset `ratio` column.
///
/// `fig2a` has none. `fig2b` gets `normalized_mse / (2 / eps²)`. `fig2c`
/// rows are regrouped into `(shifted, transformed)` pairs per epsilon and
/// dataset, both rows carrying `mse_shifted / mse_transformed`.
pub fn figure_rows(preset: Preset, reports: &[MseReport]) -> Result<Vec<ReportRow>> {
    match preset {
        Preset::Fig2a => Ok(reports.iter().cloned().map(|report| ReportRow { report, ratio: None }).collect()),
        Preset::Fig2b => Ok(reports
            .iter()
            .cloned()
            .map(|report| {
                let bound = 2.0 / (report.epsilon * report.epsilon);
                let ratio = Some(report.normalized_mse / bound);
                ReportRow { report, ratio }
            })
            .collect()),
        Preset::Fig2c => {
            let (shifted, transformed): (Vec<&MseReport>, Vec<&MseReport>) =
                reports.iter().partition(|r| r.mechanism == Mechanism::Shifted.name());
            if shifted.len() != transformed.len() {
                return Err(Error::Parameter("fig2c needs one shifted row per transformed row".into()));
            }
            let mut rows = Vec::with_capacity(reports.len());
            for (s, t) in shifted.into_iter().zip(transformed) {
                if t.mechanism != Mechanism::Transformed.name()
                    || s.epsilon != t.epsilon
                    || s.dataset_kind != t.dataset_kind
                    || s.target_mean != t.target_mean
                {
                    return Err(Error::Parameter("fig2c rows do not pair up".into()));
                }
                let ratio = Some(s.mse / t.mse);
                rows.push(ReportRow { report: s.clone(), ratio });
                rows.push(ReportRow { report: t.clone(), ratio });
            }
            Ok(rows)
        }
    }
}
