//! Corpus and dataset ingestion, CSV output.
//!
//! Corpora are UTF-8 text with one polymer-SMILES per line; blank lines and
//! lines starting with `#` are skipped. Datasets are CSV with the header
//! `smiles,value`. Floats are written with 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::smiles::{parse, SmilesError};
use crate::transfer::PropertyDataset;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: line {line}: invalid UTF-8", path.display())]
    Utf8 { path: PathBuf, line: usize },
    #[error("{}: line {line}: {source}", path.display())]
    Smiles { path: PathBuf, line: usize, source: SmilesError },
    #[error("{}: expected header \"smiles,value\", found \"{found}\"", path.display())]
    Header { path: PathBuf, found: String },
    #[error("{}: line {line}: {message}", path.display())]
    Row { path: PathBuf, line: usize, message: String },
    #[error("{}: no records", path.display())]
    Empty { path: PathBuf },
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

/// Parses corpus text; `path` only labels diagnostics.
pub fn parse_corpus(bytes: &[u8], path: &Path) -> Result<Vec<String>, IoError> {
    let mut out = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = i + 1;
        let text = std::str::from_utf8(raw).map_err(|_| IoError::Utf8 { path: path.to_path_buf(), line })?;
        let text = text.strip_suffix('\r').unwrap_or(text).trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        parse(text).map_err(|source| IoError::Smiles { path: path.to_path_buf(), line, source })?;
        out.push(text.to_string());
    }
    if out.is_empty() {
        return Err(IoError::Empty { path: path.to_path_buf() });
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<String>, IoError> {
    parse_corpus(&read_bytes(path)?, path)
}

/// Dataset name used in reports: the file stem.
pub fn dataset_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

/// Parses `smiles,value` CSV; `path` labels diagnostics and names the dataset.
pub fn parse_dataset(bytes: &[u8], path: &Path) -> Result<PropertyDataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut records = Vec::new();
    let mut header_seen = false;
    for result in rdr.records() {
        let rec = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            IoError::Row { path: path.to_path_buf(), line, message: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if !header_seen {
            let found: Vec<&str> = rec.iter().map(str::trim).collect();
            if found != ["smiles", "value"] {
                return Err(IoError::Header { path: path.to_path_buf(), found: found.join(",") });
            }
            header_seen = true;
            continue;
        }
        let row = |message: String| IoError::Row { path: path.to_path_buf(), line, message };
        if rec.len() != 2 {
            return Err(row(format!("expected 2 fields, found {}", rec.len())));
        }
        let smiles = rec[0].trim();
        parse(smiles).map_err(|source| IoError::Smiles { path: path.to_path_buf(), line, source })?;
        let value: f64 = rec[1].trim().parse().map_err(|_| row(format!("invalid value \"{}\"", &rec[1])))?;
        if !value.is_finite() {
            return Err(row(format!("non-finite value \"{}\"", &rec[1])));
        }
        records.push((smiles.to_string(), value));
    }
    if !header_seen {
        return Err(IoError::Header { path: path.to_path_buf(), found: String::new() });
    }
    if records.is_empty() {
        return Err(IoError::Empty { path: path.to_path_buf() });
    }
    Ok(PropertyDataset { name: dataset_name(path), records })
}

pub fn read_dataset(path: &Path) -> Result<PropertyDataset, IoError> {
    parse_dataset(&read_bytes(path)?, path)
}

/// 17 significant digits; round-trips any finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// RFC-4180 CSV text with LF line endings.
pub fn csv_string<R, I>(header: &[&str], rows: R) -> String
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}
