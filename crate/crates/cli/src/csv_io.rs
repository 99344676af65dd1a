//! CSV tables and atomic file output.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(i64),
    Text(String),
}

impl fmt::Display for Field {
    /// Floats use the shortest representation that parses back to the same
    /// value, which never needs more than 17 significant digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Num(v) => write!(f, "{v:?}"),
            Field::Int(v) => write!(f, "{v}"),
            Field::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Num(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_owned())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

/// A rectangular table with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Field>) -> CliResult<()> {
        if row.len() != self.header.len() {
            return Err(CliError::Numeric(format!("row of {} fields for {} columns", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Single numeric column.
    pub fn column(name: &str, values: &[f64]) -> Self {
        let mut t = Table::new([name]);
        t.rows = values.iter().map(|&v| vec![Field::Num(v)]).collect();
        t
    }

    pub fn from_matrix(m: &DMatrix<f64>, prefix: &str) -> Self {
        let mut t = Table::new((0..m.ncols()).map(|j| format!("{prefix}{j}")));
        t.rows = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| Field::Num(m[(i, j)])).collect()).collect();
        t
    }

    pub fn to_csv_string(&self) -> CliResult<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|f| f.to_string())).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn emit_csv(table: &Table, path: &Path) -> CliResult<()> {
    write_atomic(path, table.to_csv_string()?.as_bytes())
}

/// Reads a CSV with a header row and returns the header plus raw string records.
pub fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let header =
        r.headers().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok((header, rows))
}

fn parse_num(s: &str, path: &Path, row: usize, col: usize) -> CliResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{}: row {row}, column {col}: not a number: {s:?}", path.display())))
}

/// All-numeric CSV as a matrix (header row skipped).
pub fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let (header, rows) = read_table(path)?;
    let cols = header.len();
    let mut data = Vec::with_capacity(rows.len() * cols);
    for (i, row) in rows.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            data.push(parse_num(s, path, i + 1, j + 1)?);
        }
    }
    Ok(DMatrix::from_row_slice(rows.len(), cols, &data))
}

/// The named column of a CSV file, or its only column when `name` is `None`.
pub fn read_column(path: &Path, name: Option<&str>) -> CliResult<Vec<f64>> {
    let (header, rows) = read_table(path)?;
    let col = match name {
        Some(n) => header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| CliError::Config(format!("{}: no column named {n:?}", path.display())))?,
        None if header.len() == 1 => 0,
        None => {
            return Err(CliError::Config(format!(
                "{}: expected a single column, found {}",
                path.display(),
                header.len()
            )))
        }
    };
    rows.iter().enumerate().map(|(i, r)| parse_num(&r[col], path, i + 1, col + 1)).collect()
}
