//! Tabular artifacts: CSV, JSON and gnuplot data files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levelset::MeasureSweep;
use crate::resolvent::ResolventPoint;
use crate::semigroup::{DecayMethod, DecaySeries};
use crate::sweep::{RateTable, TruncationRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
    GnuplotData,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::GnuplotData => "dat",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// A named table with a fixed column schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Axis names for the gnuplot header.
    pub axes: (&'static str, &'static str),
}

impl Table {
    pub fn new(columns: Vec<&'static str>, axes: (&'static str, &'static str)) -> Self {
        Self { columns, rows: Vec::new(), axes }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Types with a tabular artifact.
pub trait Tabular {
    fn table(&self) -> Table;
}

impl Tabular for RateTable {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["nu", "k", "psi", "semigroup_rate", "regime", "grid_converged"], ("nu", "psi"));
        for r in &self.rows {
            t.push(vec![
                r.nu.into(),
                r.k.into(),
                r.psi.into(),
                r.semigroup_rate.into(),
                r.regime.as_str().into(),
                r.grid_converged.into(),
            ]);
        }
        t
    }
}

impl Tabular for [ResolventPoint] {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["lambda", "sigma_min"], ("lambda", "sigma_min"));
        for p in self {
            t.push(vec![p.lambda.into(), p.sigma_min.into()]);
        }
        t
    }
}

impl Tabular for DecaySeries {
    fn table(&self) -> Table {
        let method = match self.method {
            DecayMethod::Ensemble => "ensemble",
            DecayMethod::AdjointPowerIteration => "adjoint_power_iteration",
        };
        let mut t = Table::new(vec!["t", "norm_bound", "method"], ("t", "norm_bound"));
        for (&time, &b) in self.times.iter().zip(&self.norm_bounds) {
            t.push(vec![time.into(), b.into(), method.into()]);
        }
        t
    }
}

impl Tabular for [TruncationRow] {
    fn table(&self) -> Table {
        let mut t = Table::new(vec!["L", "psi"], ("L", "psi"));
        for r in self {
            t.push(vec![r.length.into(), r.psi.into()]);
        }
        t
    }
}

impl Tabular for MeasureSweep {
    fn table(&self) -> Table {
        let mut t = Table::new(
            vec!["lambda", "delta", "m", "measure_E", "measure_Ecal", "ratio", "saturated"],
            ("lambda", "ratio"),
        );
        for r in &self.rows {
            t.push(vec![
                r.lambda.into(),
                r.delta.into(),
                r.m.into(),
                r.measure_e.into(),
                r.measure_ecal.into(),
                r.ratio.into(),
                r.saturated.into(),
            ]);
        }
        t
    }
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_csv(t: &Table) -> String {
    let mut out = t.columns.join(",");
    out.push('\n');
    for row in &t.rows {
        let fields: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(x) => format_float(*x),
                Cell::Int(i) => i.to_string(),
                Cell::Bool(b) => b.to_string(),
                Cell::Text(s) => csv_field(s),
                Cell::Missing => String::new(),
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn render_gnuplot(t: &Table) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# x: {}  y: {}", t.axes.0, t.axes.1);
    let _ = writeln!(out, "# {}", t.columns.join(" "));
    for row in &t.rows {
        let fields: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(x) => format_float(*x),
                Cell::Int(i) => i.to_string(),
                Cell::Bool(b) => u8::from(*b).to_string(),
                Cell::Text(s) => s.replace(char::is_whitespace, "_"),
                Cell::Missing => "NaN".into(),
            })
            .collect();
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

fn render_json(t: &Table) -> Result<String> {
    use serde_json::{Map, Value};
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|row| {
            let mut obj = Map::new();
            for (col, c) in t.columns.iter().zip(row) {
                let v = match c {
                    Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
                    Cell::Int(i) => Value::from(*i),
                    Cell::Bool(b) => Value::Bool(*b),
                    Cell::Text(s) => Value::String(s.clone()),
                    Cell::Missing => Value::Null,
                };
                obj.insert(col.to_string(), v);
            }
            Value::Object(obj)
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows)?;
    s.push('\n');
    Ok(s)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

/// Write `table` as `<dir>/<stem>.<ext>`. An empty table is an error and
/// writes nothing.
pub fn emit_report(table: &Table, format: Format, dir: &Path, stem: &str) -> Result<PathBuf> {
    if table.is_empty() {
        return Err(Error::EmptyResults);
    }
    let body = match format {
        Format::Csv => render_csv(table),
        Format::GnuplotData => render_gnuplot(table),
        Format::Json => render_json(table)?,
    };
    write_file(dir, &format!("{stem}.{}", format.extension()), &body)
}

/// Pretty JSON dump of a serializable value.
pub fn emit_json<T: Serialize + ?Sized>(value: &T, dir: &Path, name: &str) -> Result<PathBuf> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(dir, name, &s)
}
