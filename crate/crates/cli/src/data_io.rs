//! Headerless numeric CSV in and out.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use mtica::DataMatrix;
use nalgebra::DMatrix;

use crate::Failure;

/// Reads an `N × p` numeric matrix. Rows and columns in error messages are
/// 1-based positions in the file.
pub fn read_matrix(path: &Path, header: bool) -> Result<DataMatrix, Failure> {
    let file = File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(Failure::Operational)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |line: u64, col: usize, msg: String| {
        Failure::Operational(anyhow::anyhow!("{}: row {line}, column {col}: {msg}", path.display()))
    };
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record
            .with_context(|| format!("cannot parse {}", path.display()))
            .map_err(Failure::Operational)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    line,
                    record.len().min(w) + 1,
                    format!("expected {w} fields, found {}", record.len()),
                ));
            }
            _ => {}
        }
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, k + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, k + 1, format!("`{field}` is not finite")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let p = width.unwrap_or(0);
    if rows == 0 || p == 0 {
        return Err(Failure::Operational(anyhow::anyhow!(
            "{}: no data rows",
            path.display()
        )));
    }
    let m = DMatrix::from_row_slice(rows, p, &values);
    DataMatrix::new(m).map_err(|e| Failure::Operational(e.into()))
}

/// Writes a matrix with shortest round-trip float formatting.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
