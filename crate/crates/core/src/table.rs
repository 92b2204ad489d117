//! CSV files with a commented, self-describing header.
//!
//! ```text
//! # <title>
//! # config: <hash of the producing configuration>
//! # generated: <timestamp>            (optional)
//! # units: time [s], x [m], ...
//! time,x,...
//! ```
//!
//! Floats are written in shortest round-trip form, so data rows are
//! reproducible byte for byte.

use std::io::{self, Write};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileHeader {
    pub title: String,
    pub config_hash: String,
    pub timestamp: Option<String>,
    /// Extra `# key: value` lines.
    pub meta: Vec<(String, String)>,
}

impl FileHeader {
    pub fn new(title: impl Into<String>, config_hash: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            config_hash: config_hash.into(),
            timestamp: None,
            meta: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn with_timestamp(mut self, ts: impl Into<String>) -> Self {
        self.timestamp = Some(ts.into());
        self
    }
}

/// Column name and unit.
pub type Column = (String, String);

pub fn col(name: impl Into<String>, unit: impl Into<String>) -> Column {
    (name.into(), unit.into())
}

pub fn write_csv<W: Write>(
    mut out: W,
    header: &FileHeader,
    columns: &[Column],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    writeln!(out, "# {}", header.title)?;
    writeln!(out, "# config: {}", header.config_hash)?;
    if let Some(ts) = &header.timestamp {
        writeln!(out, "# generated: {ts}")?;
    }
    for (k, v) in &header.meta {
        writeln!(out, "# {k}: {v}")?;
    }
    let units: Vec<String> = columns.iter().map(|(n, u)| format!("{n} [{u}]")).collect();
    writeln!(out, "# units: {}", units.join(", "))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns.iter().map(|(n, _)| n.as_str()))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Value of a `# key: value` header line.
pub fn header_value(text: &str, key: &str) -> Option<String> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l[1..].trim().split_once(':'))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim().to_string())
}

/// Reads a file written by [`write_csv`]: column names and numeric rows.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
            .collect::<Result<Vec<f64>, String>>()?;
        rows.push(row);
    }
    Ok((names, rows))
}
