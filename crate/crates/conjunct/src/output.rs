//! Deterministic CSV and JSON emission: UTF-8, LF line endings, `.` decimal
//! separator, floats in scientific notation with a fixed number of
//! significant digits.

use std::io::Write;
use std::path::Path;

use conjunct_core::{DetectionCurve, DilutionCurve};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

/// Rows of cells under a header whose names carry units, e.g. `pc [1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }
}

/// `digits` significant digits in scientific notation, e.g. `4.98752081e-3`.
pub fn format_float(value: f64, digits: usize) -> String {
    format!("{:.*e}", digits.max(1) - 1, value)
}

pub fn csv_string(table: &Table, digits: usize) -> String {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    writer.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        let fields: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Float(v) => format_float(*v, digits),
                Cell::Int(v) => v.to_string(),
                Cell::Bool(v) => v.to_string(),
                Cell::Text(s) => s.clone(),
            })
            .collect();
        writer.write_record(&fields).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("flush")).expect("utf-8")
}

pub fn json_string<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serializable");
    out.push('\n');
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(text.as_bytes()).map_err(io)
}

pub fn dilution_table(curve: &DilutionCurve) -> Table {
    let mut table = Table::new(&["s_over_r [1]", "pc [1]"]);
    for &(s, pc) in &curve.grid {
        table.push(vec![Cell::Float(s), Cell::Float(pc)]);
    }
    table
}

pub fn detection_table(curve: &DetectionCurve) -> Table {
    let mut table = Table::new(&["threshold [1]", "failure_probability [1]", "detection_rate [1]", "stderr [1]"]);
    for p in &curve.points {
        table.push(vec![
            Cell::Float(p.threshold),
            Cell::Float(p.failure_probability),
            Cell::Float(p.detection_rate),
            Cell::Float(p.stderr),
        ]);
    }
    table
}

/// Writes a dilution curve as CSV with columns `s_over_r`, `pc`.
pub fn write_curve_csv(curve: &DilutionCurve, path: &Path, digits: usize) -> Result<(), CliError> {
    write_text(path, &csv_string(&dilution_table(curve), digits))
}
