//! CSV tables and JSON files with provenance (config hash and seed).

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::input("column names and columns differ in number"));
        }
        if columns.iter().any(|c| c.len() != columns[0].len()) {
            return Err(Error::input("columns differ in length"));
        }
        Ok(Self { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[i])
    }

    /// Column `name`, or an input error naming the available columns.
    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name).ok_or_else(|| {
            Error::input(format!("no column '{name}' (have: {})", self.names.join(", ")))
        })
    }

    /// First column.
    pub fn m(&self) -> Result<&[f64]> {
        self.columns.first().map(|c| c.as_slice()).ok_or_else(|| Error::input("table has no columns"))
    }

    /// Second column.
    pub fn t(&self) -> Result<&[f64]> {
        self.columns
            .get(1)
            .map(|c| c.as_slice())
            .ok_or_else(|| Error::input("table has no second (t) column"))
    }
}

/// Identifies the configuration that produced an output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new<T: Serialize>(config: &T, seed: u64) -> Result<Self> {
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(config)?,
            seed,
        })
    }

    fn comment(&self) -> String {
        format!(
            "# cowlib {} config_hash={} seed={}",
            self.tool_version, self.config_hash, self.seed
        )
    }
}

/// SHA-256 of the compact JSON form of `config`, hex encoded.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Parses CSV text line by line. Lines starting with `#` are comments. The first
/// record is a header unless every field parses as a number, in which case
/// columns are named `m`, `t`, `c2`, `c3`, ...
pub fn parse_csv(text: &str) -> Result<Table> {
    let mut names: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = vec![];
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(trimmed.as_bytes())
            .records()
            .next()
            .transpose()
            .map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?
            .unwrap_or_default();
        let parsed: Vec<Option<f64>> = rec.iter().map(|f| f.parse::<f64>().ok()).collect();
        if names.is_none() {
            if parsed.iter().any(|v| v.is_none()) {
                names = Some(rec.iter().map(String::from).collect());
                columns = vec![vec![]; rec.len()];
                continue;
            }
            let n = rec.len();
            names = Some(
                (0..n)
                    .map(|i| match i {
                        0 => "m".to_string(),
                        1 => "t".to_string(),
                        _ => format!("c{i}"),
                    })
                    .collect(),
            );
            columns = vec![vec![]; n];
        }
        if rec.len() != columns.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", columns.len(), rec.len()),
            });
        }
        for (j, (v, raw)) in parsed.iter().zip(rec.iter()).enumerate() {
            match v {
                Some(x) if x.is_finite() => columns[j].push(*x),
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("field {} ('{raw}') is not a finite number", j + 1),
                    })
                }
            }
        }
    }
    let names = names.ok_or_else(|| Error::input("CSV input is empty"))?;
    Table::new(names, columns)
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text)
}

/// CSV text with a provenance comment, a header and 17 significant digits
/// per value.
pub fn format_csv(table: &Table, provenance: Option<&Provenance>) -> Result<String> {
    let mut out = String::new();
    if let Some(p) = provenance {
        out.push_str(&p.comment());
        out.push('\n');
    }
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(&table.names).map_err(|e| Error::input(e.to_string()))?;
    for i in 0..table.n_rows() {
        w.write_record(table.columns.iter().map(|c| format!("{:.16e}", c[i])))
            .map_err(|e| Error::input(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).expect("CSV output is UTF-8"));
    Ok(out)
}

pub fn write_csv(path: &Path, table: &Table, provenance: Option<&Provenance>) -> Result<()> {
    fs::write(path, format_csv(table, provenance)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Output JSON document: provenance next to the payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
