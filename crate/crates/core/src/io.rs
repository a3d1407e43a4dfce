//! Plain-text dataset formats: header-less feature CSVs, one-label-per-line
//! files, real vectors, and JSON helpers.

use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::perturb::FeatureMatrix;

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    let v = tok.trim().parse::<f64>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("bad number {tok:?}: {e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("non-finite value {tok:?}"),
        });
    }
    Ok(v)
}

/// Features: `n` rows of `D` comma-separated reals, no header.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
        })?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!(
                    "expected {} columns, got {}",
                    width.unwrap_or(0),
                    record.len()
                ),
            });
        }
        for tok in record.iter() {
            data.push(parse_f64(tok, path, idx + 1)?);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput(format!(
            "{}: no features",
            path.display()
        )));
    }
    let x = Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Shape(e.to_string()))?;
    FeatureMatrix::new(x)
}

pub fn write_features(path: impl AsRef<Path>, x: &FeatureMatrix) -> Result<()> {
    let mut out = String::new();
    for row in x.view().rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

/// Labels: one non-negative integer per line.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse::<usize>().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: format!("bad label {line:?}: {e}"),
        })?);
    }
    Ok(labels)
}

pub fn write_labels(path: impl AsRef<Path>, y: &[usize]) -> Result<()> {
    let text: String = y.iter().map(|v| format!("{v}\n")).collect();
    write_text(path.as_ref(), &text)
}

/// A real vector written one value per line. Reading also accepts
/// comma-separated values on any number of lines.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        for tok in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            out.push(parse_f64(tok, path, idx + 1)?);
        }
    }
    Ok(out)
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let text: String = v.iter().map(|x| format!("{x}\n")).collect();
    write_text(path.as_ref(), &text)
}

pub fn write_string(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_text(path.as_ref(), text)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path.as_ref(), &text)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    Ok(serde_json::from_str(&read_text(path)?)?)
}
