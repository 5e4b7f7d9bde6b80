use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Formats with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a headerless CSV, one matrix row per line.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            trimmed.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let row = parsed.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: "non-finite value".into(),
            });
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

/// One value per line.
pub fn write_vector_csv(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &x in v {
        writeln!(w, "{}", fmt_f64(x))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let m = read_matrix_csv(path)?;
    Ok(m.into_vec())
}
