//! Data ingest and output helpers.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use sepcore::Shape;

use crate::error::{CliError, CliResult};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reads an `n x p` data file. Each row holds one observation; a leading
/// non-numeric row is taken as a header. With `row_major` each row is the
/// row-major flattening of the `p1 x p2` observation and is converted to
/// column-stacked order.
pub fn read_data(path: &Path, shape: Shape, row_major: bool) -> CliResult<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let p = shape.p();
    let mut values = Vec::new();
    let mut n = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(CliError::input(format!("row {}: {e}", line + 1))),
        };
        if row.len() != p {
            return Err(CliError::input(format!(
                "row {} has {} entries, expected p1 * p2 = {p}",
                line + 1,
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(CliError::input(format!("row {}: non-finite entry {v}", line + 1)));
        }
        if row_major {
            let mut col = vec![0.0; p];
            for r in 0..shape.p1 {
                for c in 0..shape.p2 {
                    col[c * shape.p1 + r] = row[r * shape.p2 + c];
                }
            }
            values.extend(col);
        } else {
            values.extend(row);
        }
        n += 1;
    }
    if n == 0 {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Ok(DMatrix::from_row_slice(n, p, &values))
}

/// CSV text from a header and rows of fields.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::input(e.to_string()))
}

/// Writes `text` to `path`, or to stdout when `path` is absent.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}
