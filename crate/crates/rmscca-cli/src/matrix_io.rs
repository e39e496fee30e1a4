//! CSV matrix reading and writing.
//!
//! Format: UTF-8, comma separated, one header row of column names, every
//! other row one observation of decimal reals. The writer prints floats with
//! the shortest representation that parses back to the identical bits, so a
//! write-read round trip is exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::AppError;

pub fn read_matrix_csv(path: &Path) -> Result<(Array2<f64>, Vec<String>), AppError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| AppError::input(format!("cannot open {}: {e}", path.display())))?;

    let names: Vec<String> = reader
        .headers()
        .map_err(|e| AppError::input(format!("{}: bad header: {e}", path.display())))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if names.is_empty() || names.iter().all(|n| n.is_empty()) {
        return Err(AppError::input(format!("{}: empty or missing header row", path.display())));
    }

    let mut values: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let row_number = idx + 2; // 1-based, after the header
        let record =
            record.map_err(|e| AppError::input(format!("{}: row {row_number}: {e}", path.display())))?;
        if record.len() != names.len() {
            return Err(AppError::input(format!(
                "{}: ragged row {row_number}: expected {} fields, found {}",
                path.display(),
                names.len(),
                record.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let parsed = cell.trim().parse::<f64>().map_err(|_| {
                AppError::input(format!(
                    "{}: row {row_number}, column {} ('{}'): not a decimal real",
                    path.display(),
                    col + 1,
                    cell.trim()
                ))
            })?;
            values.push(parsed);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(AppError::input(format!("{}: no data rows", path.display())));
    }

    let matrix = Array2::from_shape_vec((n_rows, names.len()), values)
        .expect("row-major dimensions already checked");
    Ok((matrix, names))
}

pub fn write_matrix_csv(path: &Path, matrix: &Array2<f64>, names: &[String]) -> Result<(), AppError> {
    assert_eq!(names.len(), matrix.ncols());
    let mut text = String::new();
    text.push_str(&names.join(","));
    text.push('\n');
    for row in matrix.rows() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                text.push(',');
            }
            text.push_str(&format_float(*v));
            first = false;
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Shortest decimal form that round-trips to the exact same f64.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Write to a sibling temp file, then rename over the target, so readers
/// never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let tmp = path.with_extension("tmp-write");
    let mut file = fs::File::create(&tmp)
        .map_err(|e| AppError::input(format!("cannot create {}: {e}", tmp.display())))?;
    file.write_all(bytes)
        .and_then(|_| file.flush())
        .map_err(|e| AppError::input(format!("cannot write {}: {e}", tmp.display())))?;
    drop(file);
    fs::rename(&tmp, path)
        .map_err(|e| AppError::input(format!("cannot move output into {}: {e}", path.display())))
}
