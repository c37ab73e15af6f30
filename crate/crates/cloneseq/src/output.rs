//! Tabular result serialization shared by the CLI subcommands.
//!
//! Every emitted document carries a `schema_version`, the subcommand that
//! produced it, its parameters, and a column-oriented table. Numeric cells
//! are rendered to 12 significant digits in both formats, and the JSON
//! numbers are re-parsed from that rendering so the two formats agree
//! digit for digit.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidInput(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub command: String,
    pub parameters: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(command: &str) -> Self {
        Table {
            command: command.to_string(),
            parameters: Map::new(),
            columns: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn columns(mut self, names: &[&str]) -> Self {
        self.columns = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let io = |e: std::io::Error| Error::InvalidInput(format!("write failed: {e}"));
        writeln!(out, "# schema_version={SCHEMA_VERSION}").map_err(io)?;
        writeln!(out, "# command={}", self.command).map_err(io)?;
        let mut keys: Vec<_> = self.parameters.keys().collect();
        keys.sort();
        for k in keys {
            writeln!(out, "# {k}={}", param_str(&self.parameters[k])).map_err(io)?;
        }
        writeln!(out, "{}", self.columns.join(",")).map_err(io)?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| sig12(v)).collect();
            writeln!(out, "{}", cells.join(",")).map_err(io)?;
        }
        Ok(())
    }

    fn write_json(&self, out: &mut dyn Write) -> Result<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| Value::Array(row.iter().map(|&v| json_number(v)).collect()))
            .collect();
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "parameters": self.parameters,
            "columns": self.columns,
            "rows": rows,
        });
        serde_json::to_writer_pretty(&mut *out, &doc)
            .map_err(|e| Error::InvalidInput(format!("write failed: {e}")))?;
        writeln!(out).map_err(|e| Error::InvalidInput(format!("write failed: {e}")))?;
        Ok(())
    }
}

fn param_str(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Render to 12 significant digits; plain decimal for moderate magnitudes,
/// scientific otherwise.
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        trim_zeros(&s)
    } else {
        format!("{v:.11e}")
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// The JSON number that round-trips through the 12-digit rendering.
fn json_number(v: f64) -> Value {
    let parsed: f64 = sig12(v).parse().unwrap_or(v);
    serde_json::Number::from_f64(parsed)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}
