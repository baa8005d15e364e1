//! Dataset CSV files: a header row, numeric cells, and one label column.
//! Generated datasets carry a sidecar `<stem>.meta.json` listing feature
//! roles.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sparse_evo_core::{Dataset, FeatureMetadata, Normalization};

use crate::error::{IoError, Result};

pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// Reads a dataset, normalizing features with statistics of the whole file.
/// Labels must be non-negative integers.
pub fn load_csv(path: &Path, label_column: &str, normalize: Normalization) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IoError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| IoError::csv(path, e))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| IoError::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: label_column.to_string(),
            message: "label column not found in header".into(),
        })?;
    let width = headers.len();
    let n_features = width - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // row numbers are 1-based and count the header line
        let row = i + 2;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => IoError::Parse {
                path: path.to_path_buf(),
                row,
                column: String::from("*"),
                message: format!("expected {width} cells, found {len}"),
            },
            _ => IoError::csv(path, e),
        })?;
        for (j, cell) in record.iter().enumerate() {
            let parse_err = |message: String| IoError::Parse {
                path: path.to_path_buf(),
                row,
                column: headers[j].to_string(),
                message,
            };
            if j == label_idx {
                let y: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(format!("non-numeric label {cell:?}")))?;
                if y < 0.0 || y.fract() != 0.0 {
                    return Err(parse_err(format!("label {cell:?} is not a class index")));
                }
                labels.push(y as usize);
            } else {
                let x: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(format!("non-numeric cell {cell:?}")))?;
                features.push(x);
            }
        }
    }
    let mut data = Dataset::new(features, n_features, labels)?;
    data.normalize(normalize)?;
    if let Some(meta) = read_metadata(path)? {
        data = data.with_metadata(meta)?;
    }
    Ok(data)
}

/// Writes features as `f0..f{d-1}` followed by the label column. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_dataset_csv(path: &Path, data: &Dataset, label_column: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| IoError::io(path, e);
    let header: Vec<String> = (0..data.n_features())
        .map(|j| format!("f{j}"))
        .chain(std::iter::once(label_column.to_string()))
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let mut line = String::new();
    for (i, &y) in data.labels().iter().enumerate() {
        line.clear();
        for x in data.sample(i) {
            line.push_str(&x.to_string());
            line.push(',');
        }
        line.push_str(&y.to_string());
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)?;
    if let Some(meta) = data.metadata() {
        write_metadata(path, meta)?;
    }
    Ok(())
}

/// `data/set.csv` → `data/set.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_metadata(csv_path: &Path, meta: &FeatureMetadata) -> Result<()> {
    let path = sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(meta).map_err(|e| IoError::json(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| IoError::io(&path, e))
}

/// Reads the sidecar metadata next to a dataset, if there is one.
pub fn read_metadata(csv_path: &Path) -> Result<Option<FeatureMetadata>> {
    let path = sidecar_path(csv_path);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| IoError::io(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| IoError::json(&path, e))
}
