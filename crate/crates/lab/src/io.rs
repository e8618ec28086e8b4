//! CSV files with a `#`-prefixed metadata header.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use polylab_core::{TraceRecord, TrainingTrace, WeightMatrix};

use crate::error::{LabError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRACE_COLUMNS: [&str; 8] = ["step", "t", "row", "l1", "l2sq", "l4p4", "m_prime", "loss"];

/// Ordered `key = value` pairs written above the CSV header.
pub type Metadata = Vec<(String, String)>;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| LabError::io(path, e))
}

fn open_with_metadata(path: &Path, meta: &[(String, String)]) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let file = File::create(path).map_err(|e| LabError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "# polylab {VERSION}")?;
        for (k, v) in meta {
            writeln!(w, "# {k} = {v}")?;
        }
        Ok(())
    };
    write(&mut w).map_err(|e| LabError::io(path, e))?;
    Ok(w)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> LabError + '_ {
    move |source| LabError::Csv { path: path.to_path_buf(), source }
}

/// Writes a table of preformatted cells.
pub fn write_table(path: &Path, meta: &[(String, String)], header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let w = open_with_metadata(path, meta)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        out.write_record(r).map_err(csv_err(path))?;
    }
    out.flush().map_err(|e| LabError::io(path, e))
}

pub fn trace_rows(trace: &TrainingTrace) -> Vec<Vec<String>> {
    trace
        .records
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                fmt_f64(r.t),
                r.row.to_string(),
                fmt_f64(r.l1),
                fmt_f64(r.l2sq),
                fmt_f64(r.l4p4),
                r.m_prime.to_string(),
                fmt_f64(r.loss),
            ]
        })
        .collect()
}

pub fn write_trace(path: &Path, meta: &[(String, String)], trace: &TrainingTrace) -> Result<()> {
    write_table(path, meta, &TRACE_COLUMNS, &trace_rows(trace))
}

/// Metadata, header and string cells of a CSV written by [`write_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let meta = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l[1..].trim().split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err(path))?;
    Ok(Table { meta, header, rows })
}

fn format_error(path: &Path, reason: impl Into<String>) -> LabError {
    LabError::Format { path: path.to_path_buf(), reason: reason.into() }
}

fn cell<T: std::str::FromStr>(path: &Path, row: &[String], idx: usize) -> Result<T> {
    row.get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_error(path, format!("bad value in column {}", idx + 1)))
}

pub fn read_trace(path: &Path) -> Result<(Metadata, TrainingTrace)> {
    let table = read_table(path)?;
    if table.header != TRACE_COLUMNS {
        return Err(format_error(path, "unexpected trace header"));
    }
    let records = table
        .rows
        .iter()
        .map(|r| {
            Ok(TraceRecord {
                step: cell(path, r, 0)?,
                t: cell(path, r, 1)?,
                row: cell(path, r, 2)?,
                l1: cell(path, r, 3)?,
                l2sq: cell(path, r, 4)?,
                l4p4: cell(path, r, 5)?,
                m_prime: cell(path, r, 6)?,
                loss: cell(path, r, 7)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((table.meta, TrainingTrace { records }))
}

/// One row per feature, one column per neuron.
pub fn write_matrix(path: &Path, meta: &[(String, String)], w: &WeightMatrix) -> Result<()> {
    let header: Vec<String> = (0..w.cols()).map(|k| format!("n{k}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = w.rows_iter().map(|r| r.iter().map(|&x| fmt_f64(x)).collect()).collect();
    write_table(path, meta, &header, &rows)
}

pub fn read_matrix(path: &Path) -> Result<(Metadata, WeightMatrix)> {
    let table = read_table(path)?;
    let cols = table.header.len();
    let mut data = Vec::with_capacity(table.rows.len() * cols);
    for r in &table.rows {
        if r.len() != cols {
            return Err(format_error(path, "ragged matrix row"));
        }
        for k in 0..cols {
            data.push(cell(path, r, k)?);
        }
    }
    let w = WeightMatrix::from_vec(table.rows.len(), cols, data).map_err(|e| format_error(path, e.to_string()))?;
    Ok((table.meta, w))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

/// Resolved configuration plus per-file entries, as metadata pairs.
pub fn metadata(resolved: &[(&'static str, String)], extra: &[(&str, String)]) -> Metadata {
    resolved
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .chain(extra.iter().map(|(k, v)| (k.to_string(), v.clone())))
        .collect()
}

pub fn cell_dir(experiment_dir: &Path, cell: &str) -> PathBuf {
    experiment_dir.join(cell)
}
