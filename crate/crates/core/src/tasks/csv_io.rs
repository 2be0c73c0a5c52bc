//! CSV ingestion: one row per time step, grouped into sequences by an id column.
//!
//! The first row is the header. Empty cells are missing values (NaN). Rows
//! sharing an id form one sequence in file order; sequences appear in order
//! of first occurrence.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::SequenceDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub id_column: String,
    /// Feature column names with their exogenous flags, in model order.
    pub features: Vec<(String, bool)>,
    pub dt: f64,
}

impl CsvSchema {
    pub fn new(id_column: impl Into<String>, features: Vec<(String, bool)>) -> Self {
        Self {
            id_column: id_column.into(),
            features,
            dt: 1.0,
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: malformed CSV: {other:?}", path.display())),
    }
}

pub fn load_csv_sequences(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SequenceDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data(format!("{}: missing column '{name}'", path.display())))
    };
    let id_col = column(&schema.id_column)?;
    let feature_cols = schema
        .features
        .iter()
        .map(|(name, _)| column(name))
        .collect::<Result<Vec<_>>>()?;

    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut sequences: Vec<Vec<Vec<f64>>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row_no = record.position().map_or(i as u64 + 2, |p| p.line());
        let id = record.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::Data(format!(
                "{}: empty sequence id at row {row_no}",
                path.display()
            )));
        }
        let mut row = Vec::with_capacity(feature_cols.len());
        for (&c, (name, _)) in feature_cols.iter().zip(&schema.features) {
            let cell = record.get(c).unwrap_or("").trim();
            let v = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "{}: non-numeric value '{cell}' at row {row_no}, column '{name}'",
                        path.display()
                    ))
                })?
            };
            row.push(v);
        }
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            ids.push(id);
            sequences.push(Vec::new());
            sequences.len() - 1
        });
        sequences[slot].push(row);
    }
    if sequences.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    SequenceDataset::new(
        ids,
        sequences,
        schema.features.iter().map(|(n, _)| n.clone()).collect(),
        schema.features.iter().map(|(_, e)| *e).collect(),
        schema.dt,
    )
}

/// Writes `ds` in the format read by [`load_csv_sequences`]; NaN becomes an empty cell.
pub fn save_csv_sequences(ds: &SequenceDataset, path: impl AsRef<Path>, id_column: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![id_column.to_string()];
    header.extend(ds.feature_names.iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (id, seq) in ds.ids.iter().zip(&ds.sequences) {
        for row in seq {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }));
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema(names: &[(&str, bool)]) -> CsvSchema {
        CsvSchema::new("id", names.iter().map(|(n, e)| (n.to_string(), *e)).collect())
    }

    fn write(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
        let p = dir.path().join("data.csv");
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn round_trip() {
        let ds = SequenceDataset::new(
            vec!["a".into(), "b".into()],
            vec![
                vec![vec![0.1, -2.0], vec![1.0 / 3.0, f64::NAN], vec![1e-300, 5.0]],
                vec![vec![7.0, 8.0], vec![9.5, -0.0], vec![std::f64::consts::PI, 1e20]],
            ],
            vec!["x".into(), "u".into()],
            vec![false, true],
            1.0,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.csv");
        save_csv_sequences(&ds, &p, "id").unwrap();
        let back = load_csv_sequences(&p, &schema(&[("x", false), ("u", true)])).unwrap();
        assert_eq!(back.ids, ds.ids);
        for (s1, s2) in back.sequences.iter().zip(&ds.sequences) {
            for (r1, r2) in s1.iter().zip(s2) {
                for (a, b) in r1.iter().zip(r2) {
                    assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
                }
            }
        }
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "id,x\na,1\na,oops\n");
        let err = load_csv_sequences(&p, &schema(&[("x", false)])).unwrap_err().to_string();
        assert!(err.contains("row 3") && err.contains("'x'") && err.contains("oops"), "{err}");
    }

    #[test]
    fn missing_column_and_ragged_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "id,x\na,1\n");
        let err = load_csv_sequences(&p, &schema(&[("y", false)])).unwrap_err().to_string();
        assert!(err.contains("'y'"), "{err}");
        let p = write(&dir, "id,x\na,1\na,2\nb,3\n");
        assert!(load_csv_sequences(&p, &schema(&[("x", false)])).is_err());
    }

    #[test]
    fn rows_group_by_id_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "x,id\n1,b\n2,a\n3,b\n,a\n");
        let ds = load_csv_sequences(&p, &schema(&[("x", false)])).unwrap();
        assert_eq!(ds.ids, vec!["b", "a"]);
        assert_eq!(ds.sequences[0], vec![vec![1.0], vec![3.0]]);
        assert_eq!(ds.sequences[1][0], vec![2.0]);
        assert!(ds.sequences[1][1][0].is_nan());
    }

    #[test]
    fn wide_schema_targets_endogenous_only() {
        let mut header = vec!["id".to_string()];
        let mut feats = Vec::new();
        for k in 0..23 {
            header.push(format!("f{k}"));
            feats.push((format!("f{k}"), k >= 17));
        }
        let mut text = header.join(",") + "\n";
        for t in 0..4 {
            let row: Vec<String> = (0..23).map(|k| format!("{}", t * k)).collect();
            text += &format!("ep0,{}\n", row.join(","));
        }
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, &text);
        let ds = load_csv_sequences(&p, &CsvSchema::new("id", feats)).unwrap();
        assert_eq!(ds.n_features(), 23);
        let samples = crate::tasks::window_dataset(&ds, 2).unwrap();
        assert!(samples.iter().all(|s| s.target.len() == 17 && s.window[0].len() == 23));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv_sequences("/nonexistent/x.csv", &schema(&[("x", false)])).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
