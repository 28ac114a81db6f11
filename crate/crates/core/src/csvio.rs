//! Header-checked CSV reading with line-numbered errors.

use std::path::Path;

use crate::error::{Error, Result};

fn row_error(path: &Path, err: &csv::Error) -> Error {
    Error::Row {
        path: path.to_path_buf(),
        line: err.position().map(|p| p.line()).unwrap_or(0),
        message: match err.kind() {
            csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
            _ => err.to_string(),
        },
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(crate::error::io_err(path))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(|e| row_error(path, &e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Row {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Deserializes every data row, reporting failures with their 1-based line.
pub(crate) fn read_rows<T: serde::de::DeserializeOwned>(path: &Path, expected: &[&str]) -> Result<Vec<(u64, T)>> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, expected)?;
    let headers = rdr.headers().map_err(|e| row_error(path, &e))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| row_error(path, &e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row = rec.deserialize(Some(&headers)).map_err(|e| Error::Row {
            path: path.to_path_buf(),
            line,
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        out.push((line, row));
    }
    Ok(out)
}

