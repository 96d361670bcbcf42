//! Row-level reading of the comma-separated input tables.

use std::io::Read;

use serde::de::DeserializeOwned;

/// A row that failed to parse, with its 1-based line number (the header is
/// line 1).
#[derive(Debug)]
pub(crate) struct RowError {
    pub line: u64,
    pub message: String,
}

/// Reads every data row of a headed table, pairing each with its line number.
pub(crate) fn read_rows<T: DeserializeOwned>(source: impl Read) -> Result<Vec<(u64, T)>, RowError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = rdr
        .headers()
        .map_err(|e| RowError {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| RowError {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = record.deserialize(Some(&headers)).map_err(|e| RowError {
            line,
            message: e.to_string(),
        })?;
        rows.push((line, row));
    }
    Ok(rows)
}
