use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_text;

/// Named numeric columns of equal length plus a metadata echo.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<(String, Vec<f64>)>,
    metadata: Value,
}

impl ResultTable {
    pub fn new(metadata: Value) -> Self {
        Self {
            columns: Vec::new(),
            metadata,
        }
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if let Some((_, first)) = self.columns.first() {
            if first.len() != values.len() {
                return Err(Error::DimensionMismatch {
                    left: first.len(),
                    right: values.len(),
                });
            }
        }
        self.columns.push((name.into(), values));
        Ok(())
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.push_column(name, values)?;
        Ok(self)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, v)| v.len())
    }

    pub fn metadata(&self) -> &Value {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut Value {
        &mut self.metadata
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.column_names().collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for r in 0..self.rows() {
            for (c, (_, v)) in self.columns.iter().enumerate() {
                if c > 0 {
                    out.push(',');
                }
                write!(out, "{}", v[r]).expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }

    /// Content hash of the metadata and the CSV body.
    pub fn run_id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.metadata.to_string().as_bytes());
        h.update(self.to_csv().as_bytes());
        h.finalize()
            .iter()
            .take(6)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Writes `<stem>.csv` and `<stem>.meta.json`; returns both paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let csv = dir.join(format!("{stem}.csv"));
        let meta = dir.join(format!("{stem}.meta.json"));
        write_text(&csv, &self.to_csv())?;
        let sidecar = json!({
            "run_id": self.run_id(),
            "columns": self.column_names().collect::<Vec<_>>(),
            "rows": self.rows(),
            "metadata": self.metadata,
        });
        write_text(&meta, &serde_json::to_string_pretty(&sidecar)?)?;
        Ok((csv, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_must_agree() {
        let mut t = ResultTable::new(json!({"k": 1}));
        t.push_column("t", vec![0.0, 1.0]).unwrap();
        assert!(t.push_column("x", vec![1.0]).is_err());
        t.push_column("x", vec![0.5, 0.25]).unwrap();
        assert_eq!(t.to_csv(), "t,x\n0,0.5\n1,0.25\n");
        assert_eq!(t.column("x"), Some(&[0.5, 0.25][..]));
    }

    #[test]
    fn run_id_tracks_content() {
        let a = ResultTable::new(json!({}))
            .with_column("t", vec![0.0])
            .unwrap();
        let b = ResultTable::new(json!({}))
            .with_column("t", vec![1.0])
            .unwrap();
        assert_eq!(a.run_id(), a.clone().run_id());
        assert_ne!(a.run_id(), b.run_id());
        assert_eq!(a.run_id().len(), 12);
    }

    #[test]
    fn writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultTable::new(json!({"seed": 3}))
            .with_column("t", vec![0.0, 0.5])
            .unwrap();
        let (csv, meta) = t.write(dir.path(), "demo").unwrap();
        assert_eq!(std::fs::read_to_string(csv).unwrap(), "t\n0\n0.5\n");
        let v: Value = serde_json::from_str(&std::fs::read_to_string(meta).unwrap()).unwrap();
        assert_eq!(v["metadata"]["seed"], 3);
        assert_eq!(v["rows"], 2);
    }
}
