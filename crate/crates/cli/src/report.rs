//! Deterministic TOML report documents and CSV sweep tables.

use std::fmt::Write as _;

use omx_core::{CMatrix, Complex64};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const TOOL: &str = "omx";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Float(f64),
    Int(i64),
    Bool(bool),
    Str(String),
    Array(Vec<Item>),
    /// `{ value = ..., unit = "..." }`
    Quantity(Box<Item>, &'static str),
}

impl Item {
    pub fn quantity(value: f64, unit: &'static str) -> Self {
        Item::Quantity(Box::new(Item::Float(value)), unit)
    }

    pub fn quantities(values: &[f64], unit: &'static str) -> Self {
        Item::Quantity(Box::new(Item::floats(values)), unit)
    }

    pub fn floats(values: &[f64]) -> Self {
        Item::Array(values.iter().map(|&v| Item::Float(v)).collect())
    }

    pub fn complex(z: Complex64) -> Self {
        Item::Array(vec![Item::Float(z.re), Item::Float(z.im)])
    }

    /// Rows of `[re, im]` pairs.
    pub fn matrix(m: &CMatrix) -> Self {
        Item::Array(
            (0..m.nrows())
                .map(|i| Item::Array((0..m.ncols()).map(|j| Item::complex(m[(i, j)])).collect()))
                .collect(),
        )
    }

    pub fn strings<S: AsRef<str>>(values: &[S]) -> Self {
        Item::Array(values.iter().map(|s| Item::Str(s.as_ref().to_string())).collect())
    }

    fn write(&self, out: &mut String) {
        match self {
            Item::Float(v) => out.push_str(&format_float(*v)),
            Item::Int(v) => write!(out, "{v}").expect("write to string"),
            Item::Bool(v) => write!(out, "{v}").expect("write to string"),
            Item::Str(s) => write_str(out, s),
            Item::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write(out);
                }
                out.push(']');
            }
            Item::Quantity(value, unit) => {
                out.push_str("{ value = ");
                value.write(out);
                out.push_str(", unit = ");
                write_str(out, unit);
                out.push_str(" }");
            }
        }
    }
}

/// Shortest round-trip decimal, in TOML float syntax.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 {
        "0.0".into()
    } else {
        format!("{v:?}")
    }
}

fn write_str(out: &mut String, s: &str) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => write!(out, "\\u{:04X}", c as u32).expect("write to string"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn bare_key(key: &str) -> bool {
    !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn write_key(out: &mut String, key: &str) {
    if bare_key(key) {
        out.push_str(key);
    } else {
        write_str(out, key);
    }
}

type Entry = (String, Item);

/// An ordered list of sections, each an ordered list of key/value pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    sections: Vec<(Vec<String>, Vec<Entry>)>,
}

impl Document {
    pub fn new() -> Self {
        Self::default()
    }

    /// Start a section; `path` components are joined with dots.
    pub fn section<S: AsRef<str>>(&mut self, path: &[S]) -> Section<'_> {
        self.sections.push((path.iter().map(|s| s.as_ref().to_string()).collect(), Vec::new()));
        Section(&mut self.sections.last_mut().expect("just pushed").1)
    }

    /// Copy all sections of `other` under the prefix `path`.
    pub fn embed(&mut self, path: &[&str], other: &Document) {
        for (p, entries) in &other.sections {
            let mut full: Vec<String> = path.iter().map(|s| s.to_string()).collect();
            full.extend(p.iter().cloned());
            self.sections.push((full, entries.clone()));
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (path, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push('[');
            for (j, part) in path.iter().enumerate() {
                if j > 0 {
                    out.push('.');
                }
                write_key(&mut out, part);
            }
            out.push_str("]\n");
            for (key, item) in entries {
                write_key(&mut out, key);
                out.push_str(" = ");
                item.write(&mut out);
                out.push('\n');
            }
        }
        out
    }
}

pub struct Section<'a>(&'a mut Vec<Entry>);

impl Section<'_> {
    pub fn put(&mut self, key: &str, item: Item) -> &mut Self {
        self.0.push((key.to_string(), item));
        self
    }

    pub fn float(&mut self, key: &str, v: f64) -> &mut Self {
        self.put(key, Item::Float(v))
    }

    pub fn quantity(&mut self, key: &str, v: f64, unit: &'static str) -> &mut Self {
        self.put(key, Item::quantity(v, unit))
    }

    pub fn boolean(&mut self, key: &str, v: bool) -> &mut Self {
        self.put(key, Item::Bool(v))
    }

    pub fn string(&mut self, key: &str, v: impl Into<String>) -> &mut Self {
        self.put(key, Item::Str(v.into()))
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Provenance block shared by reports and tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub input_sha256: String,
}

impl Provenance {
    pub fn new(command: &str, input: &Document) -> Self {
        Self {
            command: command.to_string(),
            input_sha256: sha256_hex(&input.render()),
        }
    }

    pub fn write(&self, doc: &mut Document) {
        doc.section(&["provenance"])
            .string("tool", TOOL)
            .string("version", VERSION)
            .string("command", self.command.clone())
            .string("input_sha256", self.input_sha256.clone());
    }
}

/// Assemble a report: provenance first, then the embedded input, then the body.
pub fn report(provenance: &Provenance, input: &Document, body: Document, warnings: &[String]) -> String {
    let mut doc = Document::new();
    provenance.write(&mut doc);
    doc.embed(&["input"], input);
    doc.embed(&[], &body);
    doc.section(&["warnings"]).put("messages", Item::strings(warnings));
    doc.render()
}

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("row {row} has {found} values, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("non-finite value {value} in column '{column}', row {row}")]
    NonFinite { column: String, row: usize, value: f64 },
}

/// Rectangular numeric table written as CSV with `#` provenance lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn new(columns: &[&str], rows: Vec<Vec<f64>>) -> Result<Self, TableError> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::Ragged {
                    row: i,
                    found: row.len(),
                    expected: columns.len(),
                });
            }
            if let Some((j, v)) = row.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(TableError::NonFinite {
                    column: columns[j].to_string(),
                    row: i,
                    value: *v,
                });
            }
        }
        Ok(Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        })
    }

    pub fn render(&self, provenance: &Provenance, input: &[(String, String)]) -> String {
        let mut out = String::new();
        writeln!(out, "# tool = {TOOL}").unwrap();
        writeln!(out, "# version = {VERSION}").unwrap();
        writeln!(out, "# command = {}", provenance.command).unwrap();
        writeln!(out, "# input_sha256 = {}", provenance.input_sha256).unwrap();
        for (k, v) in input {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendered_document_is_valid_toml() {
        let mut doc = Document::new();
        doc.section(&["a"])
            .float("x", 1.0)
            .float("tiny", 1e-300)
            .quantity("w", 2.5e15, "rad/s")
            .string("s", "quote \" and \\")
            .boolean("b", true);
        doc.section(&["coordinate", "x 1"]).put("m", Item::matrix(&CMatrix::identity(2, 2)));
        let text = doc.render();
        let parsed: toml::Table = text.parse().unwrap();
        assert_eq!(parsed["a"]["x"].as_float(), Some(1.0));
        assert_eq!(parsed["a"]["tiny"].as_float(), Some(1e-300));
        assert_eq!(parsed["a"]["w"]["unit"].as_str(), Some("rad/s"));
        assert_eq!(parsed["a"]["s"].as_str(), Some("quote \" and \\"));
        assert!(parsed["coordinate"]["x 1"]["m"].is_array());
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 9.134e7, -2.0e-17, 6.02214076e23] {
            let text = format!("v = {}", format_float(v));
            let t: toml::Table = text.parse().unwrap();
            assert_eq!(t["v"].as_float(), Some(v));
        }
    }

    #[test]
    fn table_rejects_non_finite_and_ragged() {
        assert!(matches!(SweepTable::new(&["a"], vec![vec![f64::NAN]]), Err(TableError::NonFinite { .. })));
        assert!(matches!(SweepTable::new(&["a", "b"], vec![vec![1.0]]), Err(TableError::Ragged { .. })));
    }

    #[test]
    fn table_uses_seventeen_digits() {
        let t = SweepTable::new(&["a", "b"], vec![vec![0.1, -3.0]]).unwrap();
        let p = Provenance {
            command: "test".into(),
            input_sha256: "0".into(),
        };
        let text = t.render(&p, &[]);
        let last = text.lines().last().unwrap();
        assert_eq!(last, "1.0000000000000001e-1,-3.0000000000000000e0");
        assert_eq!(last.split(',').next().unwrap().parse::<f64>().unwrap(), 0.1);
    }
}
