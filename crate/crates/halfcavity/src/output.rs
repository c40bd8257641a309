//! Plot-ready serialization: CSV tables with an embedded configuration echo
//! and JSON documents with a `meta`/`data` split.
//!
//! CSV files start with `#`-prefixed comment lines carrying the resolved
//! configuration, followed by a header row and the data rows. Numbers are
//! written with 17 significant digits, so re-parsing reproduces the exact
//! bit pattern. JSON numbers go through the shortest round-trip form, which
//! re-parses bit-identically as well.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::error::Result;

/// Full-precision decimal rendering of a double (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A flat numeric table plus its ordered configuration echo.
#[derive(Debug, Clone)]
pub struct Table {
    /// Ordered key/value pairs echoed into the output.
    pub meta: Vec<(String, String)>,
    pub headers: Vec<String>,
    /// Row-major cells; `None` renders as an empty CSV field / JSON null.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table {
            meta: Vec::new(),
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta_entry(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: &[f64]) {
        self.push_row(row.iter().map(|&v| Some(v)).collect());
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "{}", self.headers.join(","))?;
        for row in &self.rows {
            let mut line = String::new();
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                if let Some(v) = cell {
                    line.push_str(&fmt_f64(*v));
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Columnar JSON fragment: `{"columns": [...], "rows": [[...], ...]}`.
    pub fn to_json_data(&self) -> Value {
        json!({
            "columns": self.headers,
            "rows": self.rows,
        })
    }

    /// Meta echo as a JSON object, preserving numeric strings as strings.
    pub fn meta_json(&self) -> Value {
        let mut map = Map::new();
        for (k, v) in &self.meta {
            map.insert(k.clone(), Value::String(v.clone()));
        }
        Value::Object(map)
    }
}

/// Write a complete JSON document `{"meta": ..., "data": ...}`.
pub fn write_json(w: &mut impl Write, meta: Value, data: Value) -> Result<()> {
    let doc = json!({ "meta": meta, "data": data });
    serde_json::to_writer_pretty(&mut *w, &doc).map_err(std::io::Error::other)?;
    writeln!(w)?;
    Ok(())
}
