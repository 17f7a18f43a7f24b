//! Fixed-format tables for CSV and JSON emission.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::config::OutputFormat;

/// Number rendered with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0" and keep zeros in the same exponent form.
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", fmt_num(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(|v| Value::String(fmt_num(*v))).collect()))
            .collect();
        let mut s = serde_json::to_string_pretty(&json!({ "columns": self.header, "rows": rows }))
            .expect("table serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// Heatmap with a key column followed by columns labelled from `first_col`.
pub fn heatmap(row_label: &str, col_prefix: &str, first_col: usize, row_keys: &[f64], cells: &[Vec<f64>]) -> Table {
    let cols = cells.first().map_or(0, |r| r.len());
    let mut header = vec![row_label.to_string()];
    header.extend((0..cols).map(|c| format!("{col_prefix}{}", c + first_col)));
    let mut t = Table::new(header);
    for (key, row) in row_keys.iter().zip(cells) {
        let mut r = Vec::with_capacity(cols + 1);
        r.push(*key);
        r.extend_from_slice(row);
        t.push(r);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.5), "5.00000000000e-1");
        assert_eq!(fmt_num(-1.0 / 3.0), "-3.33333333333e-1");
        assert_eq!(fmt_num(-0.0), "0.00000000000e0");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["t".into(), "S".into()]);
        t.push(vec![0.0, 1.0]);
        assert_eq!(t.to_csv(), "t,S\n0.00000000000e0,1.00000000000e0\n");
    }
}
