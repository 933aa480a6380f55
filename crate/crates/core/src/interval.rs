//! Neighborhood-interval views of a dataset.
//!
//! Each sample (row) is replaced by the band `μ ± c·σ` of its k-NN
//! neighborhood, giving a lower and an upper sample view. The same is done
//! for each feature (column) against its nearest feature columns. The four
//! resulting matrices are treated downstream as independent datasets.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{NidfError, Result};
use crate::neighborhood::knn;

/// How the neighborhood standard deviation widens the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRule {
    /// `μ ± σ/α`
    #[default]
    SigmaOverAlpha,
    /// `μ ± α·σ`
    AlphaSigma,
}

impl fmt::Display for ScaleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleRule::SigmaOverAlpha => "sigma_over_alpha",
            ScaleRule::AlphaSigma => "alpha_sigma",
        })
    }
}

impl FromStr for ScaleRule {
    type Err = NidfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma_over_alpha" => Ok(ScaleRule::SigmaOverAlpha),
            "alpha_sigma" => Ok(ScaleRule::AlphaSigma),
            other => Err(NidfError::input(format!("unknown scale rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalConfig {
    pub k: usize,
    pub alpha: f64,
    pub scale_rule: ScaleRule,
    /// Count the sample itself as part of its neighborhood (`|N| = k + 1`).
    pub include_self: bool,
}

impl Default for IntervalConfig {
    fn default() -> Self {
        Self {
            k: 15,
            alpha: 3.0,
            scale_rule: ScaleRule::SigmaOverAlpha,
            include_self: true,
        }
    }
}

impl IntervalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(NidfError::input("interval k must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(NidfError::input(format!(
                "interval alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        match self.scale_rule {
            ScaleRule::SigmaOverAlpha => 1.0 / self.alpha,
            ScaleRule::AlphaSigma => self.alpha,
        }
    }

    fn check_neighborhood(&self, available: usize, axis: &str) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(NidfError::input(format!(
                "interval alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.k == 0 && !self.include_self {
            return Err(NidfError::input("empty neighborhood: k = 0 without include_self"));
        }
        if self.k >= available {
            return Err(NidfError::input(format!(
                "interval k = {} needs at least {} {axis}, have {available}",
                self.k,
                self.k + 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    SampleLow,
    SampleUp,
    FeatureLow,
    FeatureUp,
}

impl ViewKind {
    pub const ALL: [ViewKind; 4] = [
        ViewKind::SampleLow,
        ViewKind::SampleUp,
        ViewKind::FeatureLow,
        ViewKind::FeatureUp,
    ];

    /// File-name tag: `slow`, `sup`, `flow`, `fup`.
    pub fn tag(self) -> &'static str {
        match self {
            ViewKind::SampleLow => "slow",
            ViewKind::SampleUp => "sup",
            ViewKind::FeatureLow => "flow",
            ViewKind::FeatureUp => "fup",
        }
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// The four approximation views, in the fixed order of [`ViewKind::ALL`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalViews {
    views: [DataMatrix; 4],
}

impl IntervalViews {
    pub fn from_parts(views: [DataMatrix; 4]) -> Result<Self> {
        let dim = views[0].values().dim();
        if views.iter().any(|v| v.values().dim() != dim) {
            return Err(NidfError::input("interval views differ in shape"));
        }
        Ok(Self { views })
    }

    pub fn get(&self, kind: ViewKind) -> &DataMatrix {
        &self.views[kind as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ViewKind, &DataMatrix)> {
        ViewKind::ALL.into_iter().zip(self.views.iter())
    }

    pub fn as_slice(&self) -> &[DataMatrix] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-sample intervals from each row's k-NN neighborhood.
pub fn sample_interval(x: &DataMatrix, cfg: &IntervalConfig) -> Result<(DataMatrix, DataMatrix)> {
    let (low, up) = row_intervals(x.values().view(), cfg, "samples")?;
    Ok((x.replace_values(low)?, x.replace_values(up)?))
}

fn row_intervals(
    points: ArrayView2<f64>,
    cfg: &IntervalConfig,
    axis: &str,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, d) = points.dim();
    cfg.check_neighborhood(n, axis)?;
    let nb = knn(points, cfg.k)?;
    let c = cfg.scale();
    let mut low = Array2::zeros((n, d));
    let mut up = Array2::zeros((n, d));
    let mut members = Vec::with_capacity(cfg.k + 1);
    for i in 0..n {
        members.clear();
        if cfg.include_self {
            members.push(i);
        }
        members.extend(nb.row(i).iter().copied());
        let size = members.len() as f64;
        for j in 0..d {
            let mean = members.iter().map(|&m| points[[m, j]]).sum::<f64>() / size;
            let var = members
                .iter()
                .map(|&m| (points[[m, j]] - mean).powi(2))
                .sum::<f64>()
                / size;
            let half = c * var.sqrt();
            low[[i, j]] = mean - half;
            up[[i, j]] = mean + half;
        }
    }
    Ok((low, up))
}

/// Per-feature intervals from each column's k nearest feature columns.
///
/// Columns are compared as points in `R^n`; the result keeps the `n × d`
/// layout of the source.
pub fn feature_interval(
    x: &DataMatrix,
    cfg: &IntervalConfig,
) -> Result<(DataMatrix, DataMatrix)> {
    let values = x.values();
    let (n, d) = values.dim();
    cfg.check_neighborhood(d, "features")?;
    let nb = knn(values.t(), cfg.k)?;
    let c = cfg.scale();
    let mut low = Array2::zeros((n, d));
    let mut up = Array2::zeros((n, d));
    for j in 0..d {
        let mut cols: Vec<usize> = nb.row(j).to_vec();
        if cfg.include_self {
            cols.insert(0, j);
        }
        let size = cols.len() as f64;
        for (i, row) in values.rows().into_iter().enumerate() {
            let mean = cols.iter().map(|&q| row[q]).sum::<f64>() / size;
            let var = cols.iter().map(|&q| (row[q] - mean).powi(2)).sum::<f64>() / size;
            let half = c * var.sqrt();
            low[[i, j]] = mean - half;
            up[[i, j]] = mean + half;
        }
    }
    Ok((x.replace_values(low)?, x.replace_values(up)?))
}

/// Build all four views. Labels and feature ids are copied to every view.
pub fn build_views(x: &DataMatrix, cfg: &IntervalConfig) -> Result<IntervalViews> {
    let (slow, sup) = sample_interval(x, cfg)?;
    let (flow, fup) = feature_interval(x, cfg)?;
    IntervalViews::from_parts([slow, sup, flow, fup])
}
