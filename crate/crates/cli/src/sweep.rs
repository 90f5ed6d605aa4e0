//! Parameter sweeps: one run per grid point plus an index.
//!
//! Grids are written as `start:stop:n` (linear, endpoints included),
//! `log:start:stop:n` (logarithmic) or a comma-separated list.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::bundle::{to_json, ScalarValue};
use crate::{run_value, CliError, RunOptions, RunOutcome};

pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Config(format!("grid '{spec}': {why}"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let count = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| bad("point count must be an integer"))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let points = match parts.as_slice() {
        ["log", a, b, n] => {
            let (a, b, n) = (number(a)?, number(b)?, count(n)?);
            if !(a > 0.0 && b > 0.0) {
                return Err(bad("logarithmic bounds must be positive"));
            }
            spaced(a.ln(), b.ln(), n)
                .into_iter()
                .map(f64::exp)
                .collect()
        }
        [a, b, n] => spaced(number(a)?, number(b)?, count(n)?),
        [list] if list.trim().is_empty() => Vec::new(),
        [list] => list.split(',').map(number).collect::<Result<_, _>>()?,
        _ => return Err(bad("expected start:stop:n, log:start:stop:n or a list")),
    };
    if points.is_empty() {
        return Err(bad("empty grid"));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite point"));
    }
    Ok(points)
}

fn spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Sets the scalar at a dotted path. A unit-tagged quantity can be
/// addressed either as `physical.d` or `physical.d.value`.
pub fn set_parameter(config: &mut Value, path: &str, value: f64) -> Result<(), CliError> {
    let unknown = || CliError::Config(format!("unknown parameter path '{path}'"));
    let mut node = &mut *config;
    for key in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(key).ok_or_else(unknown)?,
            Value::Array(items) => {
                let i: usize = key.parse().map_err(|_| unknown())?;
                items.get_mut(i).ok_or_else(unknown)?
            }
            _ => return Err(unknown()),
        };
    }
    if node.get("unit").is_some() {
        node = node.get_mut("value").ok_or_else(unknown)?;
    }
    if !node.is_number() {
        return Err(unknown());
    }
    *node = serde_json::Number::from_f64(value)
        .map(Value::Number)
        .ok_or_else(|| CliError::Config(format!("grid value {value} is not finite")))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct IndexEntry {
    index: usize,
    value: f64,
    directory: String,
    failed_checks: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Index {
    parameter: String,
    points: Vec<IndexEntry>,
}

/// Runs every grid point (in parallel) into `point_NNNN` directories under
/// the output directory and writes `index.json` plus `sweep.csv`, a table of
/// every numeric summary entry against the swept value.
pub fn sweep(
    config: &Value,
    path: &str,
    grid: &[f64],
    opts: &RunOptions,
    out: &Path,
) -> Result<Vec<RunOutcome>, CliError> {
    if grid.is_empty() {
        return Err(CliError::Config("empty grid".into()));
    }
    let configs = grid
        .iter()
        .map(|&v| {
            let mut c = config.clone();
            set_parameter(&mut c, path, v)?;
            crate::config::ExperimentConfig::from_value(&c)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let width = grid.len().to_string().len().max(4);
    let outcomes = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let dir = out.join(format!("point_{i:0width$}"));
            log::info!("sweep point {i}: {path} = {}", grid[i]);
            run_value(c, opts, &dir)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let index = Index {
        parameter: path.to_string(),
        points: outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| IndexEntry {
                index: i,
                value: grid[i],
                directory: format!("point_{i:0width$}"),
                failed_checks: if opts.check {
                    o.bundle.failed_checks()
                } else {
                    Vec::new()
                },
            })
            .collect(),
    };
    std::fs::write(out.join("index.json"), to_json(&index)?)?;

    let mut keys: Vec<&String> = outcomes[0]
        .bundle
        .summary
        .iter()
        .filter(|(_, s)| matches!(s.value, ScalarValue::Number(_) | ScalarValue::Integer(_)))
        .map(|(k, _)| k)
        .collect();
    keys.retain(|k| outcomes.iter().all(|o| o.bundle.get(k).is_some()));
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    let mut header = vec![path.to_string()];
    header.extend(keys.iter().map(|k| k.to_string()));
    w.write_record(&header).map_err(io)?;
    for (v, o) in grid.iter().zip(&outcomes) {
        let mut row = vec![crate::bundle::format_field(*v)];
        row.extend(
            keys.iter()
                .map(|k| crate::bundle::format_field(o.bundle.get(k).unwrap())),
        );
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    std::fs::write(out.join("sweep.csv"), bytes)?;
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0.1, 0.2,0.4").unwrap(), vec![0.1, 0.2, 0.4]);
        let log = parse_grid("log:1:100:3").unwrap();
        assert!((log[1] - 10.0).abs() < 1e-12 && (log[2] - 100.0).abs() < 1e-12);
        assert_eq!(parse_grid("2:3:1").unwrap(), vec![2.0]);
    }

    #[test]
    fn empty_and_malformed_grids() {
        for g in ["", "0:1:0", "log:0:1:3", "a,b", "1:2", "x:1:2:3"] {
            assert!(matches!(parse_grid(g), Err(CliError::Config(_))), "{g}");
        }
    }

    #[test]
    fn parameter_paths() {
        let mut c = json!({"physical": {"d": {"value": 0.2, "unit": "m"}}, "model": {"g": 0.05, "chi": [1.0, 2.0]}});
        set_parameter(&mut c, "physical.d", 0.4).unwrap();
        set_parameter(&mut c, "model.chi.1", 3.0).unwrap();
        set_parameter(&mut c, "model.g", 0.1).unwrap();
        assert_eq!(c["physical"]["d"]["value"], json!(0.4));
        assert_eq!(c["model"]["chi"], json!([1.0, 3.0]));
        assert_eq!(c["model"]["g"], json!(0.1));
        for bad in ["model.h", "physical.d.unit", "model", "model.chi.7"] {
            assert!(set_parameter(&mut c, bad, 1.0).is_err(), "{bad}");
        }
    }
}
