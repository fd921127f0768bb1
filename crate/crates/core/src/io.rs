//! CSV plumbing shared by the log, stock, decision and report formats.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

/// Reads every record of a headed CSV, pairing each with its 1-based line.
pub fn read_csv_from<R: Read, T: DeserializeOwned>(rdr: R, label: &str) -> Result<Vec<(u64, T)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
    let mut out = Vec::new();
    for rec in reader.deserialize::<T>() {
        match rec {
            Ok(row) => {
                // Header is line 1; records follow.
                out.push((out.len() as u64 + 2, row));
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(Error::BadRow { path: label.to_string(), line, msg: e.to_string() });
            }
        }
    }
    Ok(out)
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<(u64, T)>> {
    read_csv_from(open(path)?, &path.display().to_string())
}

/// Minimal record writer; every cell is pre-formatted text.
pub struct CsvOut<W: Write> {
    inner: csv::Writer<W>,
    label: String,
}

impl<W: Write> CsvOut<W> {
    pub fn new(w: W, label: &str, header: &[&str]) -> Result<Self> {
        let mut out = Self { inner: csv::Writer::from_writer(w), label: label.to_string() };
        out.row(header)?;
        Ok(out)
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, cells: impl IntoIterator<Item = S>) -> Result<()> {
        self.inner.write_record(cells).map_err(|source| Error::Csv { path: self.label.clone().into(), source })
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|source| Error::Io { path: self.label.clone().into(), source })?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Io { path: self.label.clone().into(), source: e.into_error() })
    }
}

pub fn csv_file(path: &Path, header: &[&str]) -> Result<CsvOut<File>> {
    CsvOut::new(create(path)?, &path.display().to_string(), header)
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn bad_row(label: &str, line: u64, err: Error) -> Error {
    Error::BadRow { path: label.to_string(), line, msg: err.to_string() }
}
