//! CSV ingestion: records, group names and weight files.

use std::collections::HashMap;
use std::path::Path;

use crate::domain::{GroupWeights, RawRecord};

use super::config::ColumnMap;
use super::CliError;

/// Dense ids for group names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupIndex {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl GroupIndex {
    /// Fixes the id order; names must be distinct.
    pub fn from_names(names: Vec<String>) -> Result<Self, String> {
        let mut ids = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if ids.insert(n.clone(), i).is_some() {
                return Err(format!("group `{n}` is listed twice"));
            }
        }
        Ok(Self { names, ids })
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One parsed data row with its source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub line: u64,
    pub group: String,
    pub label: bool,
    pub prediction: bool,
}

fn parse_bit(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "true" | "TRUE" | "True" => Some(true),
        "0" | "false" | "FALSE" | "False" => Some(false),
        _ => None,
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize, CliError> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        let found: Vec<&str> = headers.iter().collect();
        CliError::Data(format!("{}: missing column `{name}` (found: {})", path.display(), found.join(", ")))
    })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    CliError::Data(format!("{}:{line}: {e}", path.display()))
}

/// Reads the data file. Extra columns are ignored.
pub fn read_rows(path: &Path, cols: &ColumnMap) -> Result<Vec<Row>, CliError> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let (gi, li, pi) =
        (column(&headers, &cols.group, path)?, column(&headers, &cols.label, path)?, column(&headers, &cols.prediction, path)?);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bit = |i: usize, name: &str| {
            parse_bit(&rec[i]).ok_or_else(|| {
                CliError::Data(format!("{}:{line}: column `{name}`: expected 0 or 1, got `{}`", path.display(), &rec[i]))
            })
        };
        let group = rec[gi].to_string();
        if group.is_empty() {
            return Err(CliError::Data(format!("{}:{line}: empty group", path.display())));
        }
        rows.push(Row { line, group, label: bit(li, &cols.label)?, prediction: bit(pi, &cols.prediction)? });
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Group index made from the sorted distinct names in `rows`.
pub fn index_from_rows(rows: &[Row]) -> GroupIndex {
    let mut names: Vec<String> = rows.iter().map(|r| r.group.clone()).collect();
    names.sort();
    names.dedup();
    GroupIndex::from_names(names).expect("deduplicated")
}

/// Maps rows to ids; rows of unknown groups are an error.
pub fn to_records(rows: &[Row], index: &GroupIndex, path: &Path) -> Result<Vec<RawRecord>, CliError> {
    rows.iter()
        .map(|r| {
            let g = index.id(&r.group).ok_or_else(|| {
                CliError::Data(format!("{}:{}: group `{}` has no weight", path.display(), r.line, r.group))
            })?;
            Ok(RawRecord::new(g, r.label, r.prediction))
        })
        .collect()
}

/// Reads a `group,weight` file; row order fixes group ids.
pub fn read_weights(path: &Path) -> Result<(GroupIndex, GroupWeights), CliError> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let (gi, wi) = (column(&headers, "group", path)?, column(&headers, "weight", path)?);
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let w: f64 = rec[wi]
            .parse()
            .map_err(|e| CliError::Config(format!("{}:{line}: column `weight`: {e}", path.display())))?;
        pairs.push((rec[gi].to_string(), w));
    }
    weights_from_pairs(pairs).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn weights_from_pairs(pairs: Vec<(String, f64)>) -> Result<(GroupIndex, GroupWeights), String> {
    let (names, w): (Vec<String>, Vec<f64>) = pairs.into_iter().unzip();
    let index = GroupIndex::from_names(names)?;
    let w = GroupWeights::new(w).map_err(|e| e.to_string())?;
    Ok((index, w))
}
