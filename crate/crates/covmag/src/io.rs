//! Output files.
//!
//! Every file is written to a temporary file in the destination directory
//! and renamed into place, so a failed run never leaves a partial file.
//!
//! Per-shot CSV columns: `shot,cycle_tag,photons,seed_index`. Sweep tables
//! have one header row and one row per point; floats use the shortest
//! representation that parses back to the same value.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::readout::{CycleTag, ShotRecord};

/// Writes `bytes` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ShotRow {
    shot: u64,
    cycle_tag: String,
    photons: u64,
    seed_index: u64,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Per-shot CSV with a header row.
pub fn shots_csv(shots: &[ShotRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in shots {
        w.serialize(ShotRow {
            shot: s.shot,
            cycle_tag: s.cycle_tag.label().to_string(),
            photons: s.photons,
            seed_index: s.seed_index,
        })
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

pub fn parse_shots_csv(text: &[u8]) -> Result<Vec<ShotRecord>> {
    let mut r = csv::Reader::from_reader(text);
    r.deserialize::<ShotRow>()
        .map(|row| {
            let row = row.map_err(csv_error)?;
            let cycle_tag = CycleTag::from_label(&row.cycle_tag)
                .ok_or_else(|| Error::Io(format!("unknown cycle tag `{}`", row.cycle_tag)))?;
            Ok(ShotRecord { shot: row.shot, cycle_tag, photons: row.photons, seed_index: row.seed_index })
        })
        .collect()
}

/// One table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => x.to_string(),
            Cell::Int(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::Int(x) => Value::from(*x),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

/// Plot-ready table with fixed columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    /// Appends the rows of `other`, which must have the same columns.
    pub fn extend(&mut self, other: Table) {
        assert_eq!(self.columns, other.columns);
        self.rows.extend(other.rows);
    }

    /// Same table with a leading column holding `value` on every row.
    pub fn with_leading(mut self, name: &'static str, value: Cell) -> Self {
        self.columns.insert(0, name);
        for r in &mut self.rows {
            r.insert(0, value.clone());
        }
        self
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::csv)).map_err(csv_error)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    /// Array of objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().map(Cell::json)).collect())
                })
                .collect(),
        )
    }
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}
