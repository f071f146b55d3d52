//! Report, table and plot-data writers.
//!
//! CSV floats carry 17 significant digits; plot data is two whitespace-separated columns
//! behind a `#` header line. Reports contain no timestamps, so identical inputs give
//! identical bytes.

use crate::error::Result;
use halfspace::io::{write_field, FieldFile};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// One bracket verdict.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, lo: Option<f64>, hi: Option<f64>) -> Self {
        // NaN fails every comparison, so it never passes
        let pass = value.is_finite() && lo.is_none_or(|l| value >= l) && hi.is_none_or(|h| value <= h);
        Check { name: name.into(), value, lo, hi, pass }
    }
    /// `value < hi`.
    pub fn below(name: impl Into<String>, value: f64, hi: f64) -> Self {
        let mut c = Self::within(name, value, None, Some(hi));
        c.pass = c.pass && value < hi;
        c
    }
    /// `value >= lo`.
    pub fn above(name: impl Into<String>, value: f64, lo: f64) -> Self {
        Self::within(name, value, Some(lo), None)
    }
    /// A yes/no property, recorded as 1 or 0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check { name: name.into(), value: if ok { 1.0 } else { 0.0 }, lo: Some(1.0), hi: None, pass: ok }
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}
impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::I(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::I(v as i64)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => fmt_f64(*v),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "table {}: row width", self.name);
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `x y` pairs.
#[derive(Clone, Debug)]
pub struct Plot {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Plot {
    pub fn new(name: &str, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Self {
        Plot { name: name.into(), x_label: x_label.into(), y_label: y_label.into(), points }
    }

    pub fn render(&self) -> String {
        let mut s = format!("# {} {}\n", self.x_label, self.y_label);
        for (x, y) in &self.points {
            s.push_str(&format!("{} {}\n", fmt_f64(*x), fmt_f64(*y)));
        }
        s
    }
}

/// Everything an experiment produces.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub results: BTreeMap<String, serde_json::Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
    pub fields: Vec<(String, FieldFile)>,
}

impl Artifacts {
    pub fn result(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.results.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: &'a str,
    /// `data.seed` when set in the config or on the command line.
    pub seed: Option<u64>,
    pub threads: usize,
    pub config: &'a BTreeMap<String, String>,
    pub passed: bool,
    pub checks: &'a [Check],
    pub results: &'a BTreeMap<String, serde_json::Value>,
    pub tables: Vec<String>,
    pub plots: Vec<String>,
    pub fields: Vec<String>,
}

/// Writes `report.json`, `tables/`, `plots/` and, when present, `fields/` under `dir`.
pub fn write_all(dir: &Path, report: &Report, art: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir.join("tables"))?;
    fs::create_dir_all(dir.join("plots"))?;
    for t in &art.tables {
        t.write(&dir.join("tables").join(format!("{}.csv", t.name)))?;
    }
    for p in &art.plots {
        fs::write(dir.join("plots").join(format!("{}.dat", p.name)), p.render())?;
    }
    if !art.fields.is_empty() {
        fs::create_dir_all(dir.join("fields"))?;
        for (name, f) in &art.fields {
            write_field(&dir.join("fields").join(name), f).map_err(|e| crate::error::LabError::Core { context: format!("writing field {name}"), source: e })?;
        }
    }
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        Table::new("t", &["a", "b"]).write(&p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,b\n");
        assert_eq!(Plot::new("p", "x", "y", vec![]).render(), "# x y\n");
    }

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        for v in [1.0 / 3.0, 6.02214076e23, -1e-300] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn checks_fail_on_nan_and_respect_strict_upper_bounds() {
        assert!(!Check::below("x", f64::NAN, 1.0).pass);
        assert!(!Check::below("x", 1.0, 1.0).pass);
        assert!(Check::below("x", 0.5, 1.0).pass);
        assert!(Check::within("x", 0.1, Some(0.1), Some(10.0)).pass);
        assert!(!Check::above("x", 3.4, 3.5).pass);
        assert!(Check::holds("x", true).pass && !Check::holds("x", false).pass);
    }
}
