//! CSV tables and atomic file output.

use std::io::Write;
use std::path::Path;

/// A CSV table. Numbers are written in their shortest round-trip form.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, values: Vec<f64>) {
        self.rows.push(values.iter().map(|v| format!("{v:?}")).collect());
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> std::io::Result<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        writer.into_inner().map_err(|e| e.into_error())
    }
}

/// Writes through a temporary file in the same directory, then renames it into place.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let mut file = tempfile::NamedTempFile::new_in(dir)?;
    file.write_all(bytes)?;
    file.flush()?;
    file.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

/// Reads a two-column numeric CSV with a header row.
pub fn read_columns(path: &Path) -> Result<Vec<(f64, f64)>, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let x = record.get(0).and_then(|s| s.parse().ok());
        let y = record.get(1).and_then(|s| s.parse().ok());
        match (x, y) {
            (Some(x), Some(y)) => out.push((x, y)),
            _ => return Err(format!("malformed row {:?}", record)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let values = [0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17, 0.0];
        let mut t = Table::new("x.csv", &["a", "b"]);
        for &v in &values {
            t.push(vec![v, v.sqrt().max(0.0)]);
        }
        write_atomic(dir.path(), "x.csv", &t.to_csv().unwrap()).unwrap();
        let back = read_columns(&dir.path().join("x.csv")).unwrap();
        for (&v, (a, _)) in values.iter().zip(&back) {
            assert_eq!(v.to_bits(), a.to_bits());
        }
    }
}
