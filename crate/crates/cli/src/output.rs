use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use kdvb::io::{write_plot_data, RunHeader};
use serde::Serialize;

use crate::config::Format;
use crate::CliError;

/// A rectangular table; cells are preformatted so CSV output is stable.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn num(v: f64) -> String {
    format!("{v:.17e}")
}

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    header: &'a RunHeader,
    report: &'a R,
}

pub struct Outputs {
    pub dir: PathBuf,
    pub header: RunHeader,
    pub format: Format,
}

impl Outputs {
    pub fn create(dir: &Path, header: RunHeader, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(dir.to_path_buf(), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header,
            format,
        })
    }

    fn open(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::Output(path.clone(), e))?;
        Ok((path, BufWriter::new(f)))
    }

    /// `stem.csv` with `table`, or `stem.json` with `report`, depending on the format.
    pub fn report<R: Serialize>(&self, stem: &str, table: &Table, report: &R) -> Result<PathBuf, CliError> {
        match self.format {
            Format::Csv => {
                let (path, mut w) = self.open(&format!("{stem}.csv"))?;
                let io = |e| CliError::Output(path.clone(), e);
                self.header.write_comments(&mut w).map_err(io)?;
                let mut csv = csv::Writer::from_writer(w);
                let to_io = |e: csv::Error| CliError::Output(path.clone(), e.into());
                csv.write_record(&table.columns).map_err(to_io)?;
                for r in &table.rows {
                    csv.write_record(r).map_err(to_io)?;
                }
                csv.flush().map_err(|e| CliError::Output(path.clone(), e))?;
                Ok(path)
            }
            Format::Json => {
                let (path, mut w) = self.open(&format!("{stem}.json"))?;
                let env = Envelope {
                    header: &self.header,
                    report,
                };
                serde_json::to_writer_pretty(&mut w, &env).map_err(|e| CliError::Output(path.clone(), e.into()))?;
                writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::Output(path.clone(), e))?;
                Ok(path)
            }
        }
    }

    pub fn plot(&self, name: &str, labels: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.open(name)?;
        write_plot_data(&mut w, &self.header, labels, rows)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::Output(path.clone(), e))?;
        Ok(path)
    }

    pub fn binary(&self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.open(name)?;
        write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::Output(path.clone(), e))?;
        Ok(path)
    }
}
