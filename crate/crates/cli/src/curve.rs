//! Column-oriented numeric tables with self-describing metadata.
//!
//! CSV files carry the metadata as `# key: value` lines above the header and
//! get a JSON sidecar with the same content. Floats are written with Rust's
//! shortest round-trip formatting, so rereading is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::CliError;

pub const UNITS_CONVENTION: &str = "k_F = E_F = 1, m = 1/2, hbar = 1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveFile {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    name: String,
    columns: Vec<Column>,
    rows: usize,
    metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct JsonCurve {
    name: String,
    columns: Vec<Column>,
    metadata: BTreeMap<String, String>,
    /// Column-major data; non-finite values are written as strings.
    data: Vec<Vec<JsonValue>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonValue {
    Number(f64),
    Text(String),
}

impl From<f64> for JsonValue {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            JsonValue::Number(v)
        } else {
            JsonValue::Text(v.to_string())
        }
    }
}

impl JsonValue {
    fn value(&self) -> Result<f64, CliError> {
        match self {
            JsonValue::Number(v) => Ok(*v),
            JsonValue::Text(s) => parse_float(s),
        }
    }
}

fn parse_float(s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Io(format!("not a number: {s:?}")))
}

impl CurveFile {
    pub fn new(name: impl Into<String>) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("units".to_string(), UNITS_CONVENTION.to_string());
        metadata.insert("code_version".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            name: name.into(),
            columns: Vec::new(),
            rows: Vec::new(),
            metadata,
        }
    }

    pub fn column(mut self, name: &str, unit: &str) -> Self {
        self.columns.push(Column {
            name: name.to_string(),
            unit: unit.to_string(),
        });
        self
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let units: Vec<String> = self.columns.iter().map(|c| format!("{}={}", c.name, c.unit)).collect();
        out.push_str(&format!("# column_units: {}\n", units.join(";")));
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self, CliError> {
        let mut metadata = BTreeMap::new();
        let mut units: Vec<(String, String)> = Vec::new();
        let mut lines = text.lines();
        let header = loop {
            let line = lines.next().ok_or_else(|| CliError::Io("csv has no header".into()))?;
            match line.strip_prefix("# ") {
                Some(meta) => {
                    let (k, v) = meta
                        .split_once(": ")
                        .ok_or_else(|| CliError::Io(format!("bad metadata line {line:?}")))?;
                    if k == "column_units" {
                        units = v
                            .split(';')
                            .filter_map(|p| p.split_once('='))
                            .map(|(a, b)| (a.to_string(), b.to_string()))
                            .collect();
                    } else {
                        metadata.insert(k.to_string(), v.to_string());
                    }
                }
                None => break line,
            }
        };
        let columns: Vec<Column> = header
            .split(',')
            .map(|n| Column {
                name: n.to_string(),
                unit: units
                    .iter()
                    .find(|(c, _)| c == n)
                    .map(|(_, u)| u.clone())
                    .unwrap_or_default(),
            })
            .collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line.split(',').map(parse_float).collect::<Result<Vec<_>, _>>()?;
            if row.len() != columns.len() {
                return Err(CliError::Io(format!("row width {} != {}", row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Self {
            name: name.to_string(),
            columns,
            rows,
            metadata,
        })
    }

    fn sidecar_json(&self) -> String {
        let sidecar = Sidecar {
            name: self.name.clone(),
            columns: self.columns.clone(),
            rows: self.rows.len(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n"
    }

    pub fn to_json(&self) -> String {
        let data = (0..self.columns.len())
            .map(|j| self.rows.iter().map(|r| JsonValue::from(r[j])).collect())
            .collect();
        let curve = JsonCurve {
            name: self.name.clone(),
            columns: self.columns.clone(),
            metadata: self.metadata.clone(),
            data,
        };
        serde_json::to_string_pretty(&curve).expect("curve serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let curve: JsonCurve = serde_json::from_str(text).map_err(|e| CliError::Io(e.to_string()))?;
        if curve.data.len() != curve.columns.len() {
            return Err(CliError::Io("column count mismatch".into()));
        }
        let n = curve.data.first().map_or(0, |c| c.len());
        let mut rows = vec![Vec::with_capacity(curve.columns.len()); n];
        for col in &curve.data {
            if col.len() != n {
                return Err(CliError::Io("ragged columns".into()));
            }
            for (row, v) in rows.iter_mut().zip(col) {
                row.push(v.value()?);
            }
        }
        Ok(Self {
            name: curve.name,
            columns: curve.columns,
            rows,
            metadata: curve.metadata,
        })
    }

    /// Writes `<name>.csv` plus `<name>.meta.json`, or a single `<name>.json`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let files = match format {
            Format::Csv => vec![
                (dir.join(format!("{}.csv", self.name)), self.to_csv()),
                (dir.join(format!("{}.meta.json", self.name)), self.sidecar_json()),
            ],
            Format::Json => vec![(dir.join(format!("{}.json", self.name)), self.to_json())],
        };
        for (path, text) in &files {
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default();
            Self::from_csv(name, &text)
        }
    }
}

/// Bitwise comparison that treats every NaN as equal to every other NaN.
pub fn same_bits(a: &CurveFile, b: &CurveFile) -> bool {
    a.columns == b.columns
        && a.metadata == b.metadata
        && a.rows.len() == b.rows.len()
        && a.rows.iter().zip(&b.rows).all(|(x, y)| {
            x.len() == y.len()
                && x.iter()
                    .zip(y)
                    .all(|(u, v)| u.to_bits() == v.to_bits() || (u.is_nan() && v.is_nan()))
        })
}
