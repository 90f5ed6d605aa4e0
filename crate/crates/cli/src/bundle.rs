//! Results of one run and their on-disk form.
//!
//! A run directory holds `summary.json` (scalars with units, check outcomes
//! and provenance, keys sorted) and one CSV per series with `time` in the
//! first column and every field written with 17 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarValue {
    Integer(u64),
    Number(f64),
    Flag(bool),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalar {
    pub value: ScalarValue,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    /// Column names; the first is always `time`.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        let mut names = vec!["time".to_string()];
        names.extend(columns.into_iter().map(Into::into));
        Self {
            columns: names,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, time: f64, values: impl IntoIterator<Item = f64>) {
        let mut row = vec![time];
        row.extend(values);
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub seed: Option<u64>,
    pub version: String,
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultBundle {
    pub summary: BTreeMap<String, Scalar>,
    pub series: BTreeMap<String, Series>,
    pub checks: Vec<Check>,
}

impl ResultBundle {
    pub fn number(&mut self, key: &str, value: f64, unit: &str) {
        let value = if value.is_finite() {
            ScalarValue::Number(value)
        } else {
            ScalarValue::Text(value.to_string())
        };
        self.summary.insert(
            key.to_string(),
            Scalar {
                value,
                unit: unit.to_string(),
            },
        );
    }

    pub fn integer(&mut self, key: &str, value: u64, unit: &str) {
        self.summary.insert(
            key.to_string(),
            Scalar {
                value: ScalarValue::Integer(value),
                unit: unit.to_string(),
            },
        );
    }

    pub fn flag(&mut self, key: &str, value: bool) {
        self.summary.insert(
            key.to_string(),
            Scalar {
                value: ScalarValue::Flag(value),
                unit: "1".to_string(),
            },
        );
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        match self.summary.get(key)?.value {
            ScalarValue::Number(v) => Some(v),
            ScalarValue::Integer(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct SummaryDocument {
    summary: BTreeMap<String, Scalar>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    checks: Vec<Check>,
    series: Vec<String>,
    provenance: Provenance,
}

/// Writes the bundle into `dir` (created if needed) and returns the paths
/// written. Only the requested formats are emitted.
pub fn write_bundle(
    bundle: &ResultBundle,
    provenance: &Provenance,
    dir: &Path,
    formats: &[Format],
    with_checks: bool,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = formats.contains(&Format::Csv);
    let mut series_files = Vec::new();
    if csv {
        for (name, series) in &bundle.series {
            let file = format!("{name}.csv");
            let path = dir.join(&file);
            fs::write(&path, series_to_csv(series)?)?;
            written.push(path);
            series_files.push(file);
        }
    }
    if formats.contains(&Format::Json) {
        let doc = SummaryDocument {
            summary: bundle.summary.clone(),
            checks: if with_checks {
                bundle.checks.clone()
            } else {
                Vec::new()
            },
            series: series_files,
            provenance: provenance.clone(),
        };
        let path = dir.join("summary.json");
        fs::write(&path, to_json(&doc)?)?;
        written.push(path);
    }
    Ok(written)
}

/// Pretty JSON with a trailing newline. Going through `Value` sorts every
/// key, struct fields included.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let err = |e: serde_json::Error| CliError::Io(std::io::Error::other(e));
    let value = serde_json::to_value(value).map_err(err)?;
    let mut s = serde_json::to_string_pretty(&value).map_err(err)?;
    s.push('\n');
    Ok(s)
}

pub fn format_field(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn series_to_csv(series: &Series) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    w.write_record(&series.columns).map_err(io)?;
    for row in &series.rows {
        w.write_record(row.iter().map(|v| format_field(*v)))
            .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn csv_to_series(text: &str) -> Result<Series, CliError> {
    let bad = |e: String| CliError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Series { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut s = Series::new(["a", "b"]);
        s.push(0.0, [1.0 / 3.0, -2.5e-300]);
        s.push(0.1, [f64::MAX, 7.0]);
        let text = series_to_csv(&s).unwrap();
        assert!(text.starts_with("time,a,b\n"));
        let back = csv_to_series(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(series_to_csv(&back).unwrap(), text);
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_field(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn non_finite_numbers_become_text() {
        let mut b = ResultBundle::default();
        b.number("x", f64::NAN, "1");
        assert_eq!(b.summary["x"].value, ScalarValue::Text("NaN".into()));
    }
}
