//! CSV and JSON artifacts.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`. CSV files use commas and LF line endings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::Adjacency;

/// Shortest round-trip representation; scientific notation outside
/// `[1e-5, 1e16)`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_rows<I, R>(path: &Path, header: Option<&[String]>, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_rows(
        path,
        None,
        (0..m.nrows()).map(|i| (0..m.ncols()).map(move |j| format_f64(m[(i, j)]))),
    )
}

/// Writes an `n x p` data matrix, optionally with a header row.
pub fn write_data_csv(path: &Path, x: &DMatrix<f64>, header: Option<&[String]>) -> Result<()> {
    if let Some(h) = header {
        if h.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: h.len(),
            });
        }
    }
    write_rows(
        path,
        header,
        (0..x.nrows()).map(|i| (0..x.ncols()).map(move |j| format_f64(x[(i, j)]))),
    )
}

pub fn write_adjacency_csv(path: &Path, adj: &Adjacency) -> Result<()> {
    write_rows(
        path,
        None,
        adj.to_rows()
            .into_iter()
            .map(|row| row.into_iter().map(|b| if b { "1" } else { "0" }.to_string())),
    )
}

/// Edge list with header `i,j` and 1-based node indices.
pub fn write_edges_csv(path: &Path, edges: &[(usize, usize)]) -> Result<()> {
    let header = ["i".to_string(), "j".to_string()];
    write_rows(
        path,
        Some(&header),
        edges
            .iter()
            .map(|&(i, j)| [(i + 1).to_string(), (j + 1).to_string()]),
    )
}

/// Numeric table read from CSV.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub values: DMatrix<f64>,
}

fn parse_error(path: &Path, line: u64, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: line {line}: {msg}", path.display()))
}

/// Reads a rectangular numeric CSV. A first row with any non-numeric field
/// is taken as a header.
pub fn read_table_csv(path: &Path) -> Result<Table> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut header = None;
    let mut data: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if k == 0 && parsed.iter().any(|r| r.is_err()) {
            header = Some(record.iter().map(str::to_string).collect());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(parse_error(
                    path,
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ));
            }
            None => width = Some(record.len()),
            _ => {}
        }
        for (col, value) in parsed.into_iter().enumerate() {
            match value {
                Ok(v) if v.is_finite() => data.push(v),
                Ok(v) => return Err(parse_error(path, line, format!("column {}: non-finite value {v}", col + 1))),
                Err(_) => {
                    return Err(parse_error(
                        path,
                        line,
                        format!("column {}: cannot parse {:?} as a number", col + 1, &record[col]),
                    ))
                }
            }
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(Table {
        header,
        values: DMatrix::from_row_slice(rows, cols, &data),
    })
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    Ok(read_table_csv(path)?.values)
}

pub fn read_adjacency_csv(path: &Path) -> Result<Adjacency> {
    let m = read_matrix_csv(path)?;
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let rows: Vec<Vec<bool>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] != 0.0).collect())
        .collect();
    Adjacency::from_rows(&rows)
}

/// Reads an `i,j` edge list with 1-based indices and returns 0-based pairs.
pub fn read_edges_csv(path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(parse_error(path, line, format!("expected 2 fields, found {}", record.len())));
        }
        let mut ends = [0usize; 2];
        for (slot, field) in ends.iter_mut().zip(record.iter()) {
            *slot = match field.parse::<usize>() {
                Ok(v) if v >= 1 => v - 1,
                _ => return Err(parse_error(path, line, format!("invalid 1-based node index {field:?}"))),
            };
        }
        edges.push((ends[0], ends[1]));
    }
    Ok(edges)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Parses a JSON configuration; errors carry the file name, line and column.
pub fn read_json_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_json_config(&text, &path.display().to_string())
}

pub fn parse_json_config<T: DeserializeOwned>(text: &str, source: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        Error::Config(format!(
            "{source}: line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })
}
