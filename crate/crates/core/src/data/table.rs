use std::path::Path;

use crate::error::{Error, Result};

/// Claim records as read from disk, before any encoding.
///
/// Cells hold the original strings; `None` marks an empty cell. Labels are
/// parsed to 0/1 at ingestion so splitting can stratify before any feature
/// is encoded. Row numbers in errors are 1-based file lines, counting the
/// header as line 1.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub label_name: String,
    pub cells: Vec<Vec<Option<String>>>,
    pub labels: Vec<u8>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// Reads a comma-separated UTF-8 file with a header row and pulls
/// `label_column` out of the feature set.
///
/// Empty cells become missing values. Every malformed row is reported with
/// its file line number.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<RawTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|err| match err.kind() {
            csv::ErrorKind::Io(_) => Error::io(path.display().to_string(), io_of(err)),
            _ => Error::Ingestion {
                row: 1,
                message: err.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|err| Error::Ingestion {
            row: 1,
            message: err.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();

    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            Error::Schema(format!(
                "label column {label_column:?} not found in header ({} columns)",
                headers.len()
            ))
        })?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut cells = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|err| Error::Ingestion {
            row: line,
            message: err.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Ingestion {
                row: line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (j, field) in record.iter().enumerate() {
            if j == label_idx {
                labels.push(parse_label(field, line)?);
            } else {
                let field = field.trim();
                row.push((!field.is_empty()).then(|| field.to_owned()));
            }
        }
        cells.push(row);
    }

    Ok(RawTable {
        feature_names,
        label_name: label_column.to_owned(),
        cells,
        labels,
    })
}

/// Accepts the label spellings seen in claim exports: Y/N, yes/no,
/// true/false, 1/0, in any case.
fn parse_label(field: &str, line: usize) -> Result<u8> {
    match field.trim().to_ascii_lowercase().as_str() {
        "1" | "y" | "yes" | "true" => Ok(1),
        "0" | "n" | "no" | "false" => Ok(0),
        other => Err(Error::Ingestion {
            row: line,
            message: format!("label {other:?} is not a recognised binary value"),
        }),
    }
}

fn io_of(err: csv::Error) -> std::io::Error {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().expect("temp file");
        file.write_all(content.as_bytes()).expect("write");
        file
    }

    #[test]
    fn parses_rows_and_missing_cells() {
        let file = write_temp("age,color,fraud_reported\n34,red,Y\n,blue,N\n51,,N\n");
        let table = load_csv(file.path(), "fraud_reported").expect("load");
        assert_eq!(table.n_rows(), 3);
        assert_eq!(table.feature_names, vec!["age", "color"]);
        assert_eq!(table.labels, vec![1, 0, 0]);
        assert_eq!(table.cells[1][0], None);
        assert_eq!(table.cells[2][1], None);
        assert_eq!(table.cells[0][0].as_deref(), Some("34"));
    }

    #[test]
    fn ragged_row_error_names_the_line() {
        let file = write_temp("a,b,fraud_reported\n1,2,Y\n3,N\n");
        let err = load_csv(file.path(), "fraud_reported").unwrap_err();
        assert!(err.to_string().contains("row 3"), "got: {err}");
    }

    #[test]
    fn missing_label_column_is_a_schema_error() {
        let file = write_temp("a,b\n1,2\n");
        let err = load_csv(file.path(), "fraud_reported").unwrap_err();
        assert!(err.to_string().contains("fraud_reported"), "got: {err}");
    }

    #[test]
    fn unparseable_label_reports_its_line() {
        let file = write_temp("a,fraud_reported\n1,Y\n2,maybe\n");
        let err = load_csv(file.path(), "fraud_reported").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("row 3") && text.contains("maybe"), "got: {text}");
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_csv("/nonexistent/claims.csv", "fraud_reported").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
