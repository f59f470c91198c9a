//! Hand-rolled CSV ingestion for strictly numeric tables.
//!
//! The accepted dialect is deliberately small: comma-separated, one header
//! row of unique names, numeric body, no quoting. Cells are trimmed before
//! parsing so padded files load, and every parse failure names the data row
//! and column. Non-finite cells are rejected like any other unparsable text
//! because downstream moments require finite inputs.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use mixedbias::Dataset;

use crate::error::CliError;

fn data_error(path: &Path, message: String) -> CliError {
    CliError::Data {
        path: path.display().to_string(),
        message,
    }
}

/// Loads a numeric CSV into a columnar [`Dataset`], in file row order.
pub fn load_csv(path: &Path) -> Result<Dataset, CliError> {
    let content =
        fs::read_to_string(path).map_err(|e| data_error(path, format!("cannot read: {e}")))?;
    let content = content.strip_prefix('\u{feff}').unwrap_or(&content);
    let mut lines = content.lines();

    let header_line = match lines.next() {
        Some(line) if !line.trim().is_empty() => line,
        _ => return Err(data_error(path, "empty file".to_string())),
    };
    let names: Vec<String> = header_line.split(',').map(|c| c.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for name in &names {
        if name.is_empty() {
            return Err(data_error(path, "empty header name".to_string()));
        }
        if !seen.insert(name.as_str()) {
            return Err(data_error(path, format!("duplicate header {name:?}")));
        }
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut row = 0usize;
    for line in lines {
        row += 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != names.len() {
            return Err(data_error(
                path,
                format!(
                    "ragged row {row}: {} fields, header has {}",
                    cells.len(),
                    names.len()
                ),
            ));
        }
        for (k, cell) in cells.iter().enumerate() {
            let text = cell.trim();
            let value: f64 = text.parse().map_err(|_| {
                data_error(
                    path,
                    format!("row {row}, column {:?}: {text:?} is not numeric", names[k]),
                )
            })?;
            if !value.is_finite() {
                return Err(data_error(
                    path,
                    format!("row {row}, column {:?}: {text:?} is not finite", names[k]),
                ));
            }
            columns[k].push(value);
        }
    }
    if row == 0 {
        return Err(data_error(path, "no data rows (header only)".to_string()));
    }

    Dataset::new(names.into_iter().zip(columns).collect()).map_err(CliError::from)
}
