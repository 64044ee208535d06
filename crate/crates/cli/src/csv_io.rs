//! Headerless comma-separated matrices, one row per line.
//!
//! Entries are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rpca_core::Matrix;

use crate::error::{CliError, CliResult};

pub fn read_matrix_csv(path: &Path) -> CliResult<Matrix> {
    let file = File::open(path).map_err(|e| CliError::input(path, e.to_string()))?;
    parse_matrix_csv(file, path)
}

/// Parses CSV text from `reader`; `path` only labels error messages.
pub fn parse_matrix_csv(reader: impl Read, path: &Path) -> CliResult<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::input(path, e.to_string()))?;
        let row = idx + 1;
        if let Some(first) = rows.first() {
            if record.len() != first.len() {
                return Err(CliError::input(
                    path,
                    format!("row {row} has {} fields, expected {}", record.len(), first.len()),
                ));
            }
        }
        let parsed = record
            .iter()
            .enumerate()
            .map(|(c, tok)| match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::input(path, format!("row {row}, column {}: cannot parse {tok:?} as a finite number", c + 1))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(parsed);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::input(path, "no matrix entries"));
    }
    Matrix::from_rows(&rows).map_err(|e| CliError::input(path, e.to_string()))
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::output(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrix(&mut w, m).map_err(|e| CliError::output(path, e))
}

pub fn write_matrix(w: &mut impl Write, m: &Matrix) -> std::io::Result<()> {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{:.16e}", m.get(i, j))?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}
