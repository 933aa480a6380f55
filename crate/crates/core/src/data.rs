//! Dense sample-by-feature datasets, CSV I/O and column normalization.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{NidfError, Result};

/// An `n × d` matrix of finite reals with optional class labels and feature names.
///
/// Labels are carried along for evaluation only; nothing in the selection or
/// fusion path reads them.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    labels: Option<Vec<usize>>,
    feature_ids: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        Self::with_metadata(values, None, None)
    }

    pub fn with_labels(values: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        Self::with_metadata(values, Some(labels), None)
    }

    pub fn with_metadata(
        values: Array2<f64>,
        labels: Option<Vec<usize>>,
        feature_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, d) = values.dim();
        if n < 2 {
            return Err(NidfError::input(format!("need at least 2 samples, got {n}")));
        }
        if d < 1 {
            return Err(NidfError::input("need at least 1 feature"));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(NidfError::input(format!(
                "non-finite value {v} at sample {i}, feature {j}"
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(NidfError::input(format!(
                    "label vector has length {}, expected {n}",
                    labels.len()
                )));
            }
        }
        if let Some(ids) = &feature_ids {
            if ids.len() != d {
                return Err(NidfError::input(format!(
                    "{} feature ids for {d} features",
                    ids.len()
                )));
            }
        }
        Ok(Self {
            values,
            labels,
            feature_ids,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn feature_ids(&self) -> Option<&[String]> {
        self.feature_ids.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// Number of distinct classes, when labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// Feature name for column `j`, falling back to `f{j}`.
    pub fn feature_id(&self, j: usize) -> String {
        match &self.feature_ids {
            Some(ids) => ids[j].clone(),
            None => format!("f{j}"),
        }
    }

    /// Same labels and feature ids, new values of identical shape.
    pub fn replace_values(&self, values: Array2<f64>) -> Result<Self> {
        if values.dim() != self.values.dim() {
            return Err(NidfError::input(format!(
                "shape {:?} does not match {:?}",
                values.dim(),
                self.values.dim()
            )));
        }
        Self::with_metadata(values, self.labels.clone(), self.feature_ids.clone())
    }

    /// Restrict to the given feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n_features()) {
            return Err(NidfError::input(format!("feature index {bad} out of range")));
        }
        let values = self.values.select(Axis(1), columns);
        let ids = self
            .feature_ids
            .as_ref()
            .map(|ids| columns.iter().map(|&c| ids[c].clone()).collect());
        Self::with_metadata(values, self.labels.clone(), ids)
    }

    pub fn without_labels(&self) -> Self {
        Self {
            values: self.values.clone(),
            labels: None,
            feature_ids: self.feature_ids.clone(),
        }
    }
}

/// Which column of a CSV file holds class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl FromStr for LabelColumn {
    type Err = NidfError;

    /// Integers select by 0-based index, anything else by header name.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

/// Read a comma-separated file into a [`DataMatrix`].
///
/// Labels are remapped to `0..c`: numerically when every label parses as an
/// integer, lexicographically otherwise.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_col: Option<&LabelColumn>,
    has_header: bool,
) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| NidfError::io(path, e))?;
    read_csv(file, label_col, has_header)
}

/// Like [`load_csv`] but from any reader.
pub fn read_csv(
    reader: impl std::io::Read,
    label_col: Option<&LabelColumn>,
    has_header: bool,
) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers: Option<Vec<String>> = if has_header {
        let h = rdr
            .headers()
            .map_err(|e| NidfError::input(format!("cannot read header: {e}")))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };

    let label_idx = match (label_col, &headers) {
        (None, _) => None,
        (Some(LabelColumn::Index(i)), _) => Some(*i),
        (Some(LabelColumn::Name(name)), Some(h)) => Some(
            h.iter()
                .position(|c| c == name)
                .ok_or_else(|| NidfError::input(format!("label column '{name}' not in header")))?,
        ),
        (Some(LabelColumn::Name(name)), None) => {
            return Err(NidfError::input(format!(
                "label column '{name}' selected by name but the file has no header"
            )))
        }
    };

    let mut width: Option<usize> = headers.as_ref().map(Vec::len);
    let mut flat = Vec::new();
    let mut raw_labels = Vec::new();
    let mut n_rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { pos, expected_len, len } => NidfError::input(format!(
                "ragged row at line {}: expected {expected_len} fields, found {len}",
                pos.as_ref().map_or(0, |p| p.line())
            )),
            _ => NidfError::input(format!("malformed csv: {e}")),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(NidfError::input(format!(
                "ragged row at line {line}: expected {w} fields, found {}",
                record.len()
            )));
        }
        if let Some(li) = label_idx {
            if li >= w {
                return Err(NidfError::input(format!(
                    "label column index {li} out of range for {w} columns"
                )));
            }
        }
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_idx {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                let col = headers
                    .as_ref()
                    .map_or_else(|| j.to_string(), |h| h[j].clone());
                NidfError::input(format!(
                    "non-numeric value '{cell}' at row {line}, column {col}"
                ))
            })?;
            if !v.is_finite() {
                let col = headers
                    .as_ref()
                    .map_or_else(|| j.to_string(), |h| h[j].clone());
                return Err(NidfError::input(format!(
                    "non-finite value at row {line}, column {col}"
                )));
            }
            flat.push(v);
        }
        n_rows += 1;
    }

    let width = width.ok_or_else(|| NidfError::input("empty csv"))?;
    let d = width - usize::from(label_idx.is_some());
    let values = Array2::from_shape_vec((n_rows, d), flat)
        .map_err(|e| NidfError::input(format!("shape error: {e}")))?;
    let feature_ids = headers.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != label_idx)
            .map(|(_, name)| name)
            .collect()
    });
    let labels = label_idx.map(|_| remap_labels(&raw_labels));
    DataMatrix::with_metadata(values, labels, feature_ids)
}

fn remap_labels(raw: &[String]) -> Vec<usize> {
    let mut distinct: Vec<&String> = raw.iter().collect();
    distinct.sort();
    distinct.dedup();
    let numeric: Option<Vec<i64>> = distinct.iter().map(|s| s.parse().ok()).collect();
    if let Some(mut nums) = numeric {
        let pairs: HashMap<&String, i64> = distinct.iter().copied().zip(nums.iter().copied()).collect();
        nums.sort_unstable();
        nums.dedup();
        raw.iter()
            .map(|s| nums.binary_search(&pairs[s]).expect("label present"))
            .collect()
    } else {
        raw.iter()
            .map(|s| distinct.binary_search(&s).expect("label present"))
            .collect()
    }
}

/// Write `data` with a header row. Labels, when present, go in a trailing
/// `label` column. Values use the shortest round-trip representation.
pub fn write_csv(data: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| NidfError::io(path, e))?;
    let mut out = String::new();
    let header: Vec<String> = (0..data.n_features()).map(|j| data.feature_id(j)).collect();
    out.push_str(&header.join(","));
    if data.labels().is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, row) in data.values().rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        if let Some(labels) = data.labels() {
            out.push_str(&format!(",{}", labels[i]));
        }
        out.push('\n');
    }
    file.write_all(out.as_bytes())
        .map_err(|e| NidfError::io(path, e))
}

/// Per-column preprocessing applied before interval construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Zscore,
    Minmax,
    None,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Zscore => "zscore",
            Normalization::Minmax => "minmax",
            Normalization::None => "none",
        })
    }
}

impl FromStr for Normalization {
    type Err = NidfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zscore" => Ok(Normalization::Zscore),
            "minmax" => Ok(Normalization::Minmax),
            "none" => Ok(Normalization::None),
            other => Err(NidfError::input(format!("unknown normalization '{other}'"))),
        }
    }
}

pub fn normalize(x: &DataMatrix, how: Normalization) -> DataMatrix {
    match how {
        Normalization::Zscore => zscore_normalize(x),
        Normalization::Minmax => minmax_normalize(x),
        Normalization::None => x.clone(),
    }
}

const CONSTANT_TOL: f64 = 1e-12;

/// Center every column and scale it to unit population standard deviation.
/// Constant columns become all zeros.
pub fn zscore_normalize(x: &DataMatrix) -> DataMatrix {
    let mut values = x.values().clone();
    let n = values.nrows() as f64;
    for mut col in values.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd < CONSTANT_TOL {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|v| (v - mean) / sd);
        }
    }
    x.replace_values(values).expect("shape preserved")
}

/// Rescale every column to `[0, 1]`. Constant columns become all zeros.
pub fn minmax_normalize(x: &DataMatrix) -> DataMatrix {
    let mut values = x.values().clone();
    for mut col in values.columns_mut() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < CONSTANT_TOL {
            col.fill(0.0);
        } else {
            col.mapv_inplace(|v| (v - lo) / (hi - lo));
        }
    }
    x.replace_values(values).expect("shape preserved")
}
