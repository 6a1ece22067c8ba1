//! Tabular sweep output with deterministic CSV and JSON renderings.
//!
//! Numbers are printed with the shortest representation that parses
//! back to the same value, so emitted bytes are stable across runs.
//! Missing values are empty CSV fields / JSON nulls; faults are spelled
//! out in status columns instead of NaN cells.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::Scenario(format!("unknown format {s:?} (expected csv or json)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Ordered key/value context: scenario name, hash, model notes.
    pub meta: Vec<(String, String)>,
}

impl SweepReport {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        SweepReport {
            title: title.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, cells: Vec<Cell>) {
        assert_eq!(
            cells.len(),
            self.columns.len(),
            "row width mismatch in report {:?}",
            self.title
        );
        for (cell, col) in cells.iter().zip(&self.columns) {
            if let Cell::Num(v) = cell {
                assert!(
                    !v.is_nan(),
                    "NaN cell in column {col:?} of report {:?}; encode faults in a status column",
                    self.title
                );
            }
        }
        self.rows.push(cells);
    }

    /// Header plus data rows. Metadata lives in the JSON form only, so a
    /// sweep with zero rows is exactly one header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let fields: Vec<String> = self.columns.iter().map(|c| csv_escape(c)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|cell| match cell {
                    Cell::Num(v) => format!("{v}"),
                    Cell::Text(s) => csv_escape(s),
                    Cell::Empty => String::new(),
                })
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        use serde_json::{json, Map, Number, Value};
        let mut meta = Map::new();
        meta.insert("title".into(), Value::String(self.title.clone()));
        for (k, v) in &self.meta {
            meta.insert(k.clone(), Value::String(v.clone()));
        }
        meta.insert(
            "columns".into(),
            Value::Array(self.columns.iter().map(|c| Value::String(c.clone())).collect()),
        );
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Array(
                    row.iter()
                        .map(|cell| match cell {
                            Cell::Num(v) => Number::from_f64(*v)
                                .map(Value::Number)
                                .expect("NaN rejected at push_row"),
                            Cell::Text(s) => Value::String(s.clone()),
                            Cell::Empty => Value::Null,
                        })
                        .collect(),
                )
            })
            .collect();
        let doc = json!({ "meta": Value::Object(meta), "rows": Value::Array(rows) });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }

    pub fn write_to_path(&self, path: &Path, format: ReportFormat) -> Result<()> {
        std::fs::write(path, self.render(format)).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Write a rendered report to `path`, or to stdout when `path` is None.
pub fn emit_report(report: &SweepReport, path: Option<&Path>, format: ReportFormat) -> Result<()> {
    match path {
        Some(p) => report.write_to_path(p, format),
        None => {
            print!("{}", report.render(format));
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SweepReport {
        let mut r = SweepReport::new("sample", &["f_hz", "status", "eta"]);
        r.meta("scenario", "case1");
        r.push_row(vec![Cell::Num(82180.25), "ok".into(), Cell::Num(0.93)]);
        r.push_row(vec![Cell::Num(-1.5e-9), "needs, quoting".into(), Cell::Empty]);
        r
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = SweepReport::new("empty", &["a", "b"]);
        assert_eq!(r.to_csv(), "a,b\n");
    }

    #[test]
    fn csv_quoting() {
        let mut r = SweepReport::new("q", &["text"]);
        r.push_row(vec!["with, comma".into()]);
        r.push_row(vec!["say \"hi\"".into()]);
        r.push_row(vec!["line\nbreak".into()]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.split('\n').collect();
        assert_eq!(lines[1], "\"with, comma\"");
        assert_eq!(lines[2], "\"say \"\"hi\"\"\"");
        assert_eq!(lines[3], "\"line");
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = sample();
        let b = sample();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn csv_and_json_agree_on_values() {
        let r = sample();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let rows = json["rows"].as_array().unwrap();
        let csv = r.to_csv();
        let csv_rows: Vec<&str> = csv.trim_end().split('\n').skip(1).collect();
        assert_eq!(rows.len(), csv_rows.len());
        // Numeric fields are never quoted; compare the first column.
        for (jrow, crow) in rows.iter().zip(&csv_rows) {
            let jnum = jrow[0].as_f64().unwrap();
            let cnum: f64 = crow.split(',').next().unwrap().parse().unwrap();
            assert_eq!(jnum.to_bits(), cnum.to_bits());
        }
        // Null cell comes back as trailing empty CSV field.
        assert!(csv_rows[1].ends_with(','));
        assert!(rows[1][2].is_null());
    }

    #[test]
    fn json_meta_carries_context() {
        let r = sample();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["meta"]["scenario"], "case1");
        assert_eq!(json["meta"]["title"], "sample");
        assert_eq!(json["meta"]["columns"][0], "f_hz");
    }

    #[test]
    #[should_panic(expected = "NaN cell")]
    fn nan_cells_are_refused() {
        let mut r = SweepReport::new("bad", &["x"]);
        r.push_row(vec![Cell::Num(f64::NAN)]);
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn width_mismatch_is_refused() {
        let mut r = SweepReport::new("bad", &["x", "y"]);
        r.push_row(vec![Cell::Num(1.0)]);
    }
}
