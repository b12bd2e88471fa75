//! Numeric tables, the CSV contract of every experiment.

use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Stored(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Rows where column `key` equals `value`.
    pub fn filter_eq(&self, key: &str, value: f64) -> Result<Table> {
        let j = self
            .columns
            .iter()
            .position(|c| c == key)
            .ok_or_else(|| CliError::Stored(format!("missing column `{key}`")))?;
        Ok(Table {
            columns: self.columns.clone(),
            rows: self.rows.iter().filter(|r| r[j] == value).cloned().collect(),
        })
    }

    /// Distinct values of a column in first-seen order.
    pub fn distinct(&self, key: &str) -> Result<Vec<f64>> {
        let mut out: Vec<f64> = Vec::new();
        for v in self.column(key)? {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for r in &self.rows {
            // `{:?}` is the shortest representation that round-trips.
            w.write_record(r.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Table> {
        let mut r = csv::Reader::from_path(path)?;
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| CliError::Stored(format!("{}: `{s}`: {e}", path.display())))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(CliError::Stored(format!("{}: ragged row", path.display())));
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![0.1 + 0.2, -1e-300]);
        t.push(vec![f64::MAX, 3.0]);
        t.write_csv(&path).unwrap();
        assert_eq!(Table::read_csv(&path).unwrap(), t);
        assert_eq!(t.filter_eq("b", 3.0).unwrap().len(), 1);
        assert!(t.column("c").is_err());
    }
}
