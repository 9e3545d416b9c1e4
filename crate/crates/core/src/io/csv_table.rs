use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{LireError, Result};

pub const CSV_SCHEMA_PREFIX: &str = "# schema: ";

/// Writes `# schema: <schema>` followed by a header row and one row per item.
pub fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| LireError::Domain(format!("{}: {e}", path.display())))?;
    }
    let body = writer
        .into_inner()
        .map_err(|e| LireError::Domain(format!("{}: {e}", path.display())))?;
    let body = String::from_utf8(body).expect("csv writer emits UTF-8");
    super::write_file(path, &format!("{CSV_SCHEMA_PREFIX}{schema}\n{body}"))
}

/// Reads a table written by [`write_csv`], checking the schema line.
pub fn read_csv<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>> {
    let text = super::read_file(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let expected = format!("{CSV_SCHEMA_PREFIX}{schema}");
    if first != expected {
        return Err(LireError::Parse {
            path: path.into(),
            line: 1,
            message: format!("expected {expected:?}, found {first:?}"),
        });
    }
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| LireError::Parse {
                path: path.into(),
                line: i + 3,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        name: String,
        value: f64,
    }

    #[test]
    fn schema_line_then_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            Row { name: "a".into(), value: 0.1 + 0.2 },
            Row { name: "b".into(), value: -1e-300 },
        ];
        write_csv(&path, "demo/v1", &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# schema: demo/v1\nname,value\n"));
        assert_eq!(read_csv::<Row>(&path, "demo/v1").unwrap(), rows);
        assert!(read_csv::<Row>(&path, "demo/v2").is_err());
    }
}
