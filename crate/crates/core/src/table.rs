//! Comma-separated tables with `#` metadata lines.
//!
//! Floats are written in scientific notation with 12 significant digits so
//! that identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::io;

use crate::dynamics::DecoherenceRates;
use crate::error::{Error, Result};
use crate::hamiltonian::SystemParams;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// `{:.11e}`, with `nan`, `inf` and `-inf` spelled out.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { meta: Vec::new(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Adds a `# key: value` line; keys keep insertion order.
    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn meta_float(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.meta(key, format_float(value))
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.columns.len(), got: row.len() });
        }
        if let Some(Cell::Text(s)) = row.iter().find(|c| matches!(c, Cell::Text(s) if s.contains([',', '\n']))) {
            return Err(Error::InvalidParameter(format!("cell '{s}' contains a delimiter")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn write_to(&self, w: &mut impl io::Write) -> io::Result<()> {
        w.write_all(self.render().as_bytes())
    }
}

/// Writes every field of `p` except `omega_q`, which callers report themselves.
pub fn params_meta(t: &mut Table, p: &SystemParams) {
    t.meta_float("omega_a", p.omega_a)
        .meta_float("omega_m", p.omega_m)
        .meta_float("g", p.g)
        .meta_float("G", p.big_g)
        .meta_float("theta", p.theta)
        .meta("truncation", format!("{}x{}", p.trunc.n_a_max(), p.trunc.n_m_max()));
}

pub fn rates_meta(t: &mut Table, r: &DecoherenceRates) {
    t.meta_float("kappa_a", r.kappa_a).meta_float("kappa_m", r.kappa_m).meta_float("gamma", r.gamma);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_float(1.0), "1.00000000000e0");
        assert_eq!(format_float(-0.0123456789012345), "-1.23456789012e-2");
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn renders_header_then_rows() {
        let mut t = Table::new(["x", "label"]);
        t.meta("dataset", "demo").meta_float("omega_a", 1.0);
        t.push(vec![0.5.into(), "g11".into()]).unwrap();
        assert_eq!(t.render(), "# dataset: demo\n# omega_a: 1.00000000000e0\nx,label\n5.00000000000e-1,g11\n");
    }

    #[test]
    fn row_width_checked() {
        let mut t = Table::new(["a", "b"]);
        assert!(t.push(vec![1.0.into()]).is_err());
        assert!(t.push(vec![1.0.into(), "x,y".into()]).is_err());
    }
}
