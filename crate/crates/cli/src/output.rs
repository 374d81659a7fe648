//! Output files. Every CSV gets a `<name>.json` sidecar with the command,
//! the fully resolved configuration, the code version and any summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Shortest round-trip representation; plain notation for moderate
/// magnitudes, exponent notation otherwise. Independent of locale.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-3..1e6).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| num(x)).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

pub struct OutputDir {
    root: PathBuf,
    command: &'static str,
    config: Value,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn new(root: &Path, command: &'static str, config: &RunConfig) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            command,
            config: serde_json::to_value(config).map_err(std::io::Error::other)?,
            written: Vec::new(),
        })
    }

    fn sidecar(&self, file: &str, summary: Value) -> Value {
        json!({
            "file": file,
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "package": env!("CARGO_PKG_NAME"),
            "config": self.config,
            "summary": summary,
        })
    }

    /// Writes `<name>.csv` and its `<name>.json` sidecar.
    pub fn write_table<T: Serialize>(&mut self, name: &str, table: &Table, summary: &T) -> std::io::Result<()> {
        let path = self.root.join(format!("{name}.csv"));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(&path)?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.written.push(path);
        let summary = serde_json::to_value(summary).map_err(std::io::Error::other)?;
        self.write_json(name, &self.sidecar(&format!("{name}.csv"), summary))
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> std::io::Result<()> {
        let path = self.root.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.5, -2.25e-7, 6.02e23, 1e-3, 999_999.5, 1.0 / 3.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(2.5e-9), "2.5e-9");
        assert_eq!(num(12.0), "12");
    }
}
