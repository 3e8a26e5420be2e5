//! Delimited tables: pairs as rows, samples as columns.

use std::path::Path;

use crate::error::CliError;
use crate::instance::SampleTable;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Reads a table whose header row holds the sample labels after one leading
/// cell, and whose rows start with a pair name.
pub fn read_sample_table(path: &Path) -> Result<SampleTable, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let header = reader.headers().map_err(|e| io_err(path, e))?.clone();
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            location: Some(format!("{} line {}", path.display(), r + 2)),
            message: e.to_string(),
        })?;
        let mut cells = record.iter();
        let name = cells.next().unwrap_or_default().to_string();
        let values = cells
            .enumerate()
            .map(|(c, v)| {
                v.parse::<f64>().map_err(|e| CliError::Parse {
                    location: Some(format!("{} line {}, column {}", path.display(), r + 2, c + 2)),
                    message: format!("\"{v}\": {e}"),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((name, values));
    }
    Ok(SampleTable { labels, rows })
}

/// Writes `rows` under a header of `corner` followed by `labels`.
pub fn write_table(path: &Path, corner: &str, labels: &[String], rows: &[(String, Vec<f64>)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header = vec![corner.to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for (name, values) in rows {
        let mut rec = vec![name.clone()];
        rec.extend(values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes arbitrary string records with a header.
pub fn write_records(path: &Path, header: &[&str], records: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in records {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads string records, skipping the header.
pub fn read_records(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    reader
        .records()
        .map(|r| {
            r.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| io_err(path, e))
        })
        .collect()
}
