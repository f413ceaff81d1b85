//! Numeric tables and their CSV / JSON encodings. Every file starts with a
//! provenance header: artifact version, config hash and master seed.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::config::OutputFormat;
use super::HarnessError;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact_version: u32,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self { artifact_version: ARTIFACT_VERSION, config_hash, seed }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# nemsim artifact_version={} config_hash={} seed={}",
            self.artifact_version, self.config_hash, self.seed
        )
    }

    pub fn parse_comment(line: &str) -> Result<Self, HarnessError> {
        let bad = || HarnessError::Format(format!("malformed header comment `{line}`"));
        let body = line.strip_prefix("# nemsim ").ok_or_else(bad)?;
        let mut version = None;
        let mut hash = None;
        let mut seed = None;
        for field in body.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(bad)?;
            match k {
                "artifact_version" => version = v.parse().ok(),
                "config_hash" => hash = Some(v.to_string()),
                "seed" => seed = v.parse().ok(),
                _ => {}
            }
        }
        Ok(Self { artifact_version: version.ok_or_else(bad)?, config_hash: hash.ok_or_else(bad)?, seed: seed.ok_or_else(bad)? })
    }
}

/// A named table of `f64` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    header: Provenance,
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<JsonNumber>>,
}

/// JSON has no NaN or infinities, so those travel as strings.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonNumber {
    Finite(f64),
    Special(String),
}

impl From<f64> for JsonNumber {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            JsonNumber::Finite(v)
        } else {
            JsonNumber::Special(v.to_string())
        }
    }
}

impl JsonNumber {
    fn value(&self) -> Result<f64, HarnessError> {
        match self {
            JsonNumber::Finite(v) => Ok(*v),
            JsonNumber::Special(s) => s.parse().map_err(|_| HarnessError::Format(format!("bad number `{s}`"))),
        }
    }
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn file_name(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => format!("{}.csv", self.name),
            OutputFormat::Json => format!("{}.json", self.name),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W, provenance: &Provenance) -> Result<(), HarnessError> {
        writeln!(out, "{}", provenance.comment_line())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`Table::write_csv`]; `name` labels the result.
    pub fn read_csv<R: Read>(input: R, name: &str) -> Result<(Self, Provenance), HarnessError> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let provenance = Provenance::parse_comment(first.trim_end())?;
        let mut r = csv::Reader::from_reader(reader);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| HarnessError::Format(format!("bad number `{v}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != columns.len() {
                return Err(HarnessError::Format("ragged row".into()));
            }
            rows.push(row);
        }
        Ok((Self { name: name.to_string(), columns, rows }, provenance))
    }

    pub fn write_json<W: Write>(&self, out: W, provenance: &Provenance) -> Result<(), HarnessError> {
        let doc = JsonTable {
            header: provenance.clone(),
            name: self.name.clone(),
            columns: self.columns.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(|&v| v.into()).collect()).collect(),
        };
        serde_json::to_writer_pretty(out, &doc).map_err(|e| HarnessError::Format(e.to_string()))
    }

    pub fn read_json<R: Read>(input: R) -> Result<(Self, Provenance), HarnessError> {
        let doc: JsonTable = serde_json::from_reader(input).map_err(|e| HarnessError::Format(e.to_string()))?;
        let rows = doc
            .rows
            .iter()
            .map(|r| r.iter().map(JsonNumber::value).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok((Self { name: doc.name, columns: doc.columns, rows }, doc.header))
    }

    pub fn write<W: Write>(&self, out: W, format: OutputFormat, provenance: &Provenance) -> Result<(), HarnessError> {
        match format {
            OutputFormat::Csv => self.write_csv(out, provenance),
            OutputFormat::Json => self.write_json(out, provenance),
        }
    }
}
