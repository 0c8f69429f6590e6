//! In-memory output files, written to disk in one go.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use isodesign_core::grid::fmt_sig;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// A file listed in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Default)]
pub struct Bundle {
    files: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a CSV whose numeric cells are written with 17 significant digits.
    pub fn add_table(&mut self, name: &str, header: &[String], rows: &[Vec<Cell>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let data = w.into_inner().map_err(|e| e.into_error())?;
        self.files.insert(name.to_string(), data);
        Ok(())
    }

    pub fn add_text(&mut self, name: &str, text: impl Into<String>) {
        self.files.insert(name.to_string(), text.into().into_bytes());
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    /// Writes every file into `dir` and returns their digests.
    pub fn write(&self, dir: &Path) -> Result<Vec<FileEntry>> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.files.len());
        for (name, data) in &self.files {
            fs::write(dir.join(name), data)?;
            entries.push(FileEntry {
                name: name.clone(),
                bytes: data.len(),
                sha256: digest(data),
            });
        }
        Ok(entries)
    }
}

pub fn digest(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_sig(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
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

pub fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}
