//! Table snapshots: manifest loading, CSV decoding and column profiles.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Settings;

/// Written in place of a null inside string columns, where an empty field
/// means the empty string.
pub const STRING_NULL: &str = "\\u0000NULL";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("missing manifest: {0}")]
    MissingManifest(String),
    #[error("manifest schema error: {0}")]
    ManifestSchemaError(String),
}

/// Reasons an entry is dropped at load time.
#[derive(Debug, Error)]
pub enum EntryError {
    #[error("data file {0} not found")]
    MissingData(String),
    #[error("cannot read {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("header mismatch: expected {expected:?}, found {found:?}")]
    HeaderMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("row count mismatch: manifest says {expected}, file has {found}")]
    RowCount { expected: usize, found: usize },
    #[error("row {row}, column {column}: cannot parse {value:?} as {dtype}")]
    BadValue { row: usize, column: String, value: String, dtype: DType },
    #[error("duplicate column name {0}")]
    DuplicateColumn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Int,
    Float,
    String,
    Bool,
    Datetime,
}

impl DType {
    pub fn is_numeric(self) -> bool {
        matches!(self, DType::Int | DType::Float)
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DType::Int => "int",
            DType::Float => "float",
            DType::String => "string",
            DType::Bool => "bool",
            DType::Datetime => "datetime",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDecl {
    pub name: String,
    pub dtype: DType,
    #[serde(rename = "nulls")]
    pub null_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(rename = "data")]
    pub data_path: String,
    #[serde(rename = "rows")]
    pub row_count: usize,
    #[serde(default)]
    pub sampled: bool,
    pub schema: Vec<ColumnDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub version: u32,
    pub entries: BTreeMap<String, ManifestEntry>,
}

/// Column-major cell storage; `None` is null.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int(Vec<Option<i64>>),
    Float(Vec<Option<f64>>),
    Bool(Vec<Option<bool>>),
    Str(Vec<Option<String>>),
    /// Kept as written so re-serialization is exact.
    Datetime(Vec<Option<String>>),
}

impl ColumnData {
    fn empty(dtype: DType) -> Self {
        match dtype {
            DType::Int => ColumnData::Int(Vec::new()),
            DType::Float => ColumnData::Float(Vec::new()),
            DType::Bool => ColumnData::Bool(Vec::new()),
            DType::String => ColumnData::Str(Vec::new()),
            DType::Datetime => ColumnData::Datetime(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int(v) => v.len(),
            ColumnData::Float(v) => v.len(),
            ColumnData::Bool(v) => v.len(),
            ColumnData::Str(v) | ColumnData::Datetime(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_null(&self, row: usize) -> bool {
        match self {
            ColumnData::Int(v) => v[row].is_none(),
            ColumnData::Float(v) => v[row].is_none(),
            ColumnData::Bool(v) => v[row].is_none(),
            ColumnData::Str(v) | ColumnData::Datetime(v) => v[row].is_none(),
        }
    }

    pub fn null_count(&self) -> usize {
        (0..self.len()).filter(|&r| self.is_null(r)).count()
    }

    /// Numeric view (int and float columns only).
    pub fn numeric(&self) -> Option<Vec<Option<f64>>> {
        match self {
            ColumnData::Int(v) => Some(v.iter().map(|x| x.map(|i| i as f64)).collect()),
            ColumnData::Float(v) => Some(v.clone()),
            _ => None,
        }
    }

    /// Seconds since the epoch for datetime columns and ISO-date strings.
    pub fn temporal(&self) -> Option<Vec<Option<f64>>> {
        match self {
            ColumnData::Datetime(v) | ColumnData::Str(v) => {
                Some(v.iter().map(|x| x.as_deref().and_then(parse_iso_timestamp)).collect())
            }
            _ => None,
        }
    }

    /// Category label of one cell.
    pub fn label(&self, row: usize) -> Option<String> {
        match self {
            ColumnData::Int(v) => v[row].map(|i| i.to_string()),
            ColumnData::Float(v) => v[row].map(format_float),
            ColumnData::Bool(v) => v[row].map(|b| if b { "True" } else { "False" }.to_string()),
            ColumnData::Str(v) | ColumnData::Datetime(v) => v[row].clone(),
        }
    }

    fn csv_field(&self, row: usize) -> String {
        match self {
            ColumnData::Str(v) => v[row].clone().unwrap_or_else(|| STRING_NULL.to_string()),
            _ => self.label(row).unwrap_or_default(),
        }
    }

    fn push(&mut self, raw: &str) -> Result<(), DType> {
        match self {
            ColumnData::Int(v) => v.push(if raw.is_empty() {
                None
            } else {
                Some(raw.parse().map_err(|_| DType::Int)?)
            }),
            ColumnData::Float(v) => v.push(if raw.is_empty() {
                None
            } else {
                let x: f64 = raw.parse().map_err(|_| DType::Float)?;
                if x.is_nan() {
                    None
                } else {
                    Some(x)
                }
            }),
            ColumnData::Bool(v) => v.push(match raw {
                "" => None,
                "True" | "true" | "1" => Some(true),
                "False" | "false" | "0" => Some(false),
                _ => return Err(DType::Bool),
            }),
            ColumnData::Str(v) => v.push(if raw == STRING_NULL { None } else { Some(raw.to_string()) }),
            ColumnData::Datetime(v) => v.push(if raw.is_empty() {
                None
            } else {
                parse_iso_timestamp(raw).ok_or(DType::Datetime)?;
                Some(raw.to_string())
            }),
        }
        Ok(())
    }
}

/// Shortest decimal that round-trips.
pub fn format_float(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x}")
}

/// Parses ISO-8601 dates and date-times to seconds since the epoch.
pub fn parse_iso_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.len() < 8 || !s.as_bytes()[0].is_ascii_digit() {
        return None;
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp() as f64);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            let utc = dt.and_utc();
            return Some(utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) / 1e9);
        }
    }
    let with_t = s.replacen(' ', "T", 1);
    DateTime::parse_from_rfc3339(&with_t)
        .ok()
        .map(|dt| dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) / 1e9)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSnapshot {
    pub columns: Vec<ColumnDecl>,
    pub data: Vec<ColumnData>,
    /// Rows present in the snapshot (the sample when `sampled`).
    pub row_count: usize,
    pub sampled: bool,
    /// Rows of the original table.
    pub total_rows: usize,
}

impl TableSnapshot {
    pub fn new(columns: Vec<(String, ColumnData)>) -> Self {
        let row_count = columns.first().map(|(_, d)| d.len()).unwrap_or(0);
        let decls = columns
            .iter()
            .map(|(name, d)| ColumnDecl {
                name: name.clone(),
                dtype: match d {
                    ColumnData::Int(_) => DType::Int,
                    ColumnData::Float(_) => DType::Float,
                    ColumnData::Bool(_) => DType::Bool,
                    ColumnData::Str(_) => DType::String,
                    ColumnData::Datetime(_) => DType::Datetime,
                },
                null_count: d.null_count(),
            })
            .collect();
        TableSnapshot {
            columns: decls,
            data: columns.into_iter().map(|(_, d)| d).collect(),
            row_count,
            sampled: false,
            total_rows: row_count,
        }
    }

    pub fn schema(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<(&ColumnDecl, &ColumnData)> {
        self.index_of(name).map(|i| (&self.columns[i], &self.data[i]))
    }

    /// Decodes CSV text against a declared schema.
    pub fn from_csv(text: &str, schema: &[ColumnDecl]) -> Result<Self, EntryError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| EntryError::Unreadable { path: String::new(), message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        let expected: Vec<String> = schema.iter().map(|c| c.name.clone()).collect();
        if header != expected {
            return Err(EntryError::HeaderMismatch { expected, found: header });
        }
        let mut data: Vec<ColumnData> = schema.iter().map(|c| ColumnData::empty(c.dtype)).collect();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| EntryError::Unreadable { path: String::new(), message: e.to_string() })?;
            for (i, col) in data.iter_mut().enumerate() {
                let raw = record.get(i).unwrap_or("");
                col.push(raw).map_err(|dtype| EntryError::BadValue {
                    row: row + 1,
                    column: schema[i].name.clone(),
                    value: raw.to_string(),
                    dtype,
                })?;
            }
        }
        let row_count = data.first().map(ColumnData::len).unwrap_or(0);
        let columns = schema
            .iter()
            .zip(&data)
            .map(|(c, d)| ColumnDecl { name: c.name.clone(), dtype: c.dtype, null_count: d.null_count() })
            .collect();
        Ok(TableSnapshot { columns, data, row_count, sampled: false, total_rows: row_count })
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        // infallible when writing to memory
        writer.write_record(self.columns.iter().map(|c| c.name.as_str())).ok();
        for row in 0..self.row_count {
            writer.write_record(self.data.iter().map(|d| d.csv_field(row))).ok();
        }
        String::from_utf8(writer.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

/// A scalar bound, numeric or lexicographic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub dtype: DType,
    pub null_count: usize,
    pub distinct_count: usize,
    pub min: Option<Bound>,
    pub max: Option<Bound>,
    pub is_temporal: bool,
    pub is_categorical: bool,
}

impl ColumnProfile {
    /// Categorical, low-cardinality and not temporal.
    pub fn is_color_candidate(&self, cap: usize) -> bool {
        self.is_categorical && self.distinct_count <= cap && !self.is_temporal
    }
}

pub fn profile(snapshot: &TableSnapshot, settings: &Settings) -> Vec<ColumnProfile> {
    snapshot
        .columns
        .iter()
        .zip(&snapshot.data)
        .map(|(decl, data)| profile_column(decl, data, settings))
        .collect()
}

fn profile_column(decl: &ColumnDecl, data: &ColumnData, settings: &Settings) -> ColumnProfile {
    let (distinct_count, min, max) = match data {
        ColumnData::Int(_) | ColumnData::Float(_) | ColumnData::Bool(_) => {
            let values: Vec<f64> = match data {
                ColumnData::Bool(v) => v.iter().flatten().map(|b| f64::from(u8::from(*b))).collect(),
                _ => data.numeric().unwrap_or_default().into_iter().flatten().collect(),
            };
            // +0.0 folds -0.0 into 0.0
            let distinct: HashSet<u64> = values.iter().map(|x| (x + 0.0).to_bits()).collect();
            let min = values.iter().copied().reduce(f64::min).map(Bound::Num);
            let max = values.iter().copied().reduce(f64::max).map(Bound::Num);
            (distinct.len(), min, max)
        }
        ColumnData::Str(v) | ColumnData::Datetime(v) => {
            let distinct: BTreeSet<&str> = v.iter().flatten().map(String::as_str).collect();
            let min = distinct.first().map(|s| Bound::Text(s.to_string()));
            let max = distinct.last().map(|s| Bound::Text(s.to_string()));
            (distinct.len(), min, max)
        }
    };
    let is_temporal = match data {
        ColumnData::Datetime(_) => true,
        ColumnData::Str(v) => {
            let non_null: Vec<&String> = v.iter().flatten().collect();
            let parsed = non_null.iter().filter(|s| parse_iso_timestamp(s).is_some()).count();
            !non_null.is_empty() && parsed as f64 >= settings.temporal_threshold * non_null.len() as f64
        }
        _ => false,
    };
    let is_categorical =
        matches!(decl.dtype, DType::String | DType::Bool) || distinct_count <= settings.categorical_cap;
    ColumnProfile {
        name: decl.name.clone(),
        dtype: decl.dtype,
        null_count: data.null_count(),
        distinct_count,
        min,
        max,
        is_temporal,
        is_categorical,
    }
}

/// Validated snapshots of one capture directory.
#[derive(Debug, Clone, Default)]
pub struct SnapshotStore {
    pub dir: PathBuf,
    /// Entries that passed validation.
    pub manifest: BTreeMap<String, ManifestEntry>,
    /// Ids listed in the manifest but dropped at load.
    pub dropped: BTreeSet<String>,
    pub tables: BTreeMap<String, TableSnapshot>,
    pub warnings: Vec<String>,
}

impl SnapshotStore {
    pub fn get(&self, id: &str) -> Option<&TableSnapshot> {
        self.tables.get(id)
    }

    /// Listed in the manifest, valid or not.
    pub fn is_tabular(&self, id: &str) -> bool {
        self.manifest.contains_key(id) || self.dropped.contains(id)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

pub fn parse_manifest(text: &str) -> Result<SnapshotManifest, SnapshotError> {
    let manifest: SnapshotManifest =
        serde_json::from_str(text).map_err(|e| SnapshotError::ManifestSchemaError(e.to_string()))?;
    if manifest.version != 1 {
        return Err(SnapshotError::ManifestSchemaError(format!(
            "unsupported version {}",
            manifest.version
        )));
    }
    Ok(manifest)
}

/// Loads `manifest.json` and every referenced CSV under `dir`. Entries that
/// fail validation are dropped with a warning.
pub fn load_manifest(dir: &Path) -> Result<SnapshotStore, SnapshotError> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|_| SnapshotError::MissingManifest(path.display().to_string()))?;
    let manifest = parse_manifest(&text)?;
    let mut store = SnapshotStore { dir: dir.to_path_buf(), ..Default::default() };
    for (id, entry) in manifest.entries {
        match load_entry(dir, &entry) {
            Ok((table, warnings)) => {
                store.warnings.extend(warnings.into_iter().map(|w| format!("{id}: {w}")));
                store.tables.insert(id.clone(), table);
                store.manifest.insert(id, entry);
            }
            Err(e) => {
                store.warnings.push(format!("{id}: dropped: {e}"));
                store.dropped.insert(id);
            }
        }
    }
    Ok(store)
}

fn load_entry(dir: &Path, entry: &ManifestEntry) -> Result<(TableSnapshot, Vec<String>), EntryError> {
    let mut names = HashSet::new();
    for c in &entry.schema {
        if !names.insert(c.name.as_str()) {
            return Err(EntryError::DuplicateColumn(c.name.clone()));
        }
    }
    let path = dir.join(&entry.data_path);
    if !path.is_file() {
        return Err(EntryError::MissingData(entry.data_path.clone()));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| EntryError::Unreadable {
        path: entry.data_path.clone(),
        message: e.to_string(),
    })?;
    let mut table = TableSnapshot::from_csv(&text, &entry.schema).map_err(|e| match e {
        EntryError::Unreadable { message, .. } => EntryError::Unreadable { path: entry.data_path.clone(), message },
        other => other,
    })?;
    if !entry.sampled && table.row_count != entry.row_count {
        return Err(EntryError::RowCount { expected: entry.row_count, found: table.row_count });
    }
    table.sampled = entry.sampled;
    table.total_rows = entry.row_count;
    let mut warnings = Vec::new();
    if !entry.sampled {
        for (declared, actual) in entry.schema.iter().zip(&table.columns) {
            if declared.null_count != actual.null_count {
                warnings.push(format!(
                    "column {} declares {} nulls, data has {}",
                    declared.name, declared.null_count, actual.null_count
                ));
            }
        }
    }
    Ok((table, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decl(name: &str, dtype: DType) -> ColumnDecl {
        ColumnDecl { name: name.into(), dtype, null_count: 0 }
    }

    #[test]
    fn csv_round_trip_with_nulls() {
        let schema = vec![
            decl("i", DType::Int),
            decl("f", DType::Float),
            decl("s", DType::String),
            decl("b", DType::Bool),
            decl("d", DType::Datetime),
        ];
        let text = "i,f,s,b,d\n1,0.1,\"a,b\",True,2020-01-01\n,,,,\n3,1e-7,\\u0000NULL,False,2020-01-02 10:00:00\n";
        let t = TableSnapshot::from_csv(text, &schema).unwrap();
        assert_eq!(t.row_count, 3);
        assert_eq!(t.columns.iter().map(|c| c.null_count).collect::<Vec<_>>(), vec![1, 1, 1, 1, 1]);
        assert_eq!(t.data[2], ColumnData::Str(vec![Some("a,b".into()), Some(String::new()), None]));
        let again = TableSnapshot::from_csv(&t.to_csv(), &schema).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn bad_values_and_headers_are_errors() {
        let schema = vec![decl("i", DType::Int)];
        assert!(matches!(
            TableSnapshot::from_csv("i\nx\n", &schema),
            Err(EntryError::BadValue { .. })
        ));
        assert!(matches!(
            TableSnapshot::from_csv("j\n1\n", &schema),
            Err(EntryError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn profiles() {
        let s = Settings::default();
        let t = TableSnapshot::new(vec![
            ("c".into(), ColumnData::Int(vec![Some(5); 10])),
            ("s".into(), ColumnData::Str(vec![Some("a".into()), Some("b".into()), Some("c".into()), None])),
            ("d".into(), ColumnData::Str(vec![Some("2020-01-01".into()), Some("2021-03-04T05:06:07".into())])),
        ]);
        let p = profile(&t, &s);
        assert_eq!(p[0].distinct_count, 1);
        assert_eq!(p[0].min, p[0].max);
        assert!(p[1].is_categorical);
        assert_eq!(p[1].distinct_count, 3);
        assert!(!p[1].is_temporal);
        assert!(p[2].is_temporal);
    }

    #[test]
    fn iso_parsing() {
        assert_eq!(parse_iso_timestamp("1970-01-02"), Some(86400.0));
        assert!(parse_iso_timestamp("2020-01-01T00:00:00+02:00").is_some());
        assert!(parse_iso_timestamp("hello").is_none());
        assert!(parse_iso_timestamp("2020").is_none());
    }
}
