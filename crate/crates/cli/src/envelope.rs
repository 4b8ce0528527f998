//! Deterministic output rendering. Every command wraps its results in a
//! versioned envelope; JSON is serialized with fixed-width floating-point
//! fields (17 significant digits, enough to reconstruct the exact double)
//! and sorted object keys, so identical inputs produce identical bytes.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use serde_json::{Map, Value};

/// Versioned wrapper around a command's output.
#[derive(Debug, Serialize)]
pub struct OutputEnvelope {
    pub command: &'static str,
    pub parameters: Map<String, Value>,
    pub results: Value,
    pub tool_version: &'static str,
}

impl OutputEnvelope {
    pub fn new(command: &'static str, parameters: Map<String, Value>, results: Value) -> Self {
        Self {
            command,
            parameters,
            results,
            tool_version: env!("CARGO_PKG_VERSION"),
        }
    }

    /// Renders the envelope as one JSON line ending in a newline.
    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut buf = Vec::new();
        let mut ser = Serializer::with_formatter(&mut buf, SignificantDigits);
        self.serialize(&mut ser)?;
        buf.push(b'\n');
        Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
    }
}

/// Writes every finite double with 17 significant digits.
struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Formats one float as a CSV cell with the same width JSON uses.
pub fn float_cell(value: f64) -> String {
    format!("{value:.16e}")
}

/// Joins a header and data rows into a CSV document.
pub fn csv_table(header: &str, rows: &[String]) -> String {
    let body: usize = rows.iter().map(|r| r.len() + 1).sum();
    let mut out = String::with_capacity(header.len() + 1 + body);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}
