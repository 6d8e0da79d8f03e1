use std::path::{Path, PathBuf};

use crate::error::CliError;

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// A header and preformatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvArtifact {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl CsvArtifact {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn write(&self, path: &Path) -> Result<PathBuf, CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(path.to_path_buf())
    }
}
