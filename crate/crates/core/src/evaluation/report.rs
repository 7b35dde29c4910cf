//! Plain-text and CSV serialization of evaluation results.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl SweepTable {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Column index by header name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Key/value entries followed by any number of tables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub title: String,
    pub entries: Vec<(String, String)>,
    pub tables: Vec<SweepTable>,
}

impl MetricsReport {
    pub fn new(title: &str) -> Self {
        Self {
            title: title.to_string(),
            ..Self::default()
        }
    }

    pub fn entry(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# {}\n", self.title);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        for t in &self.tables {
            let _ = write!(s, "\n[{}]\n{}", t.name, t.to_csv());
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Fixed-precision float formatting used in every report.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}
