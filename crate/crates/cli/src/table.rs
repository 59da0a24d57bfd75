//! CSV tables: RFC 4180 quoting, LF line ends, `{:.16e}` numbers, and a
//! trailing `config_hash` column on every row.

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64.
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Column names carry their unit in brackets, e.g. `value[claim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self::with_header(header.iter().map(|s| s.to_string()).collect())
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self, config_hash: &str) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let header = self.header.iter().map(String::as_str).chain(["config_hash"]);
        w.write_record(header).expect("in-memory write");
        for row in &self.rows {
            let cells = row.iter().map(Cell::render).chain([config_hash.to_string()]);
            w.write_record(cells).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub steps: usize,
    pub value: f64,
}

/// Columns `N`, `value`, `abs_error` (with an oracle) and
/// `ratio = error(N) / error(2N)` where `2N` is also in the sweep.
pub fn emit_convergence_table(points: &[ConvergencePoint], oracle: Option<f64>) -> Result<Table> {
    if points.len() < 2 {
        return Err(CliError::config("/converge/N", "a convergence table needs at least two grid sizes"));
    }
    let mut t = Table::new(&["N[steps]", "value[claim]", "abs_error[claim]", "ratio[1]"]);
    let error = |p: &ConvergencePoint| oracle.map(|o| (p.value - o).abs());
    for p in points {
        let ratio = points
            .iter()
            .find(|q| q.steps == 2 * p.steps)
            .and_then(|q| Some((error(p)?, error(q)?)))
            .and_then(|(e, e2)| (e2 > 0.0).then(|| e / e2));
        t.push(vec![p.steps.into(), p.value.into(), error(p).into(), ratio.into()]);
    }
    Ok(t)
}
