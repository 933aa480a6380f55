//! Baseline unsupervised feature scorers and their mapping onto a common
//! `[0, 1]`, higher-is-better importance scale.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{NidfError, Result};
use crate::interval::{IntervalViews, ViewKind};
use crate::linalg::symmetric_eigen;
use crate::neighborhood::{Bandwidth, NeighborGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    /// Laplacian Score: locality preservation on a k-NN graph.
    LapScore,
    /// Multi-cluster feature selection: L1 regression onto a spectral embedding.
    Mcfs,
    /// Column variance.
    Variance,
}

impl SelectorKind {
    pub fn orientation(self) -> Orientation {
        match self {
            SelectorKind::LapScore => Orientation::LowerBetter,
            SelectorKind::Mcfs | SelectorKind::Variance => Orientation::HigherBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SelectorKind::LapScore => "lapscore",
            SelectorKind::Mcfs => "mcfs",
            SelectorKind::Variance => "variance",
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectorKind {
    type Err = NidfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lapscore" => Ok(SelectorKind::LapScore),
            "mcfs" => Ok(SelectorKind::Mcfs),
            "variance" => Ok(SelectorKind::Variance),
            other => Err(NidfError::input(format!("unknown selector '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    LowerBetter,
    HigherBetter,
}

/// Where a score vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    Original,
    View(ViewKind),
    Fused,
}

impl fmt::Display for ScoreSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreSource::Original => f.write_str("original"),
            ScoreSource::View(v) => write!(f, "{v}"),
            ScoreSource::Fused => f.write_str("fused"),
        }
    }
}

/// A per-feature importance vector. Higher is more important.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScore {
    pub values: Array1<f64>,
    pub selector: Option<SelectorKind>,
    pub source: ScoreSource,
    /// `true` when `values` were min-max mapped onto `[0, 1]`.
    pub normalized: bool,
}

impl FeatureScore {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    /// Neighbors per node in the scoring graph.
    pub graph_k: usize,
    pub bandwidth: Bandwidth,
    /// MCFS embedding dimension; `None` means 5.
    pub n_embed: Option<usize>,
    /// MCFS L1 penalty.
    pub gamma: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            graph_k: 5,
            bandwidth: Bandwidth::Auto,
            n_embed: None,
            gamma: 0.1,
        }
    }
}

impl SelectorConfig {
    pub const DEFAULT_N_EMBED: usize = 5;

    pub fn validate(&self) -> Result<()> {
        if self.graph_k < 1 {
            return Err(NidfError::input("graph k must be at least 1"));
        }
        if !(self.gamma > 0.0) {
            return Err(NidfError::input(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.n_embed == Some(0) {
            return Err(NidfError::input("n_embed must be at least 1"));
        }
        Ok(())
    }
}

const CONSTANT_TOL: f64 = 1e-12;

/// Raw Laplacian Scores, lower is better.
///
/// For each column `f`, `f̃ = f − (fᵀD1 / 1ᵀD1)·1` and the score is
/// `f̃ᵀLf̃ / f̃ᵀDf̃`. Columns with `f̃ᵀDf̃ < 1e−12` receive the worst finite
/// score observed.
pub fn laplacian_score(x: ArrayView2<f64>, g: &NeighborGraph) -> Result<Array1<f64>> {
    let (n, d) = x.dim();
    if g.n_nodes() != n {
        return Err(NidfError::input(format!(
            "graph has {} nodes for {n} samples",
            g.n_nodes()
        )));
    }
    let total_degree = g.degrees.sum();
    if !(total_degree > 0.0) {
        return Err(NidfError::numeric("graph has zero total degree"));
    }
    let mut centered = x.to_owned();
    for mut col in centered.columns_mut() {
        let shift = col.dot(&g.degrees) / total_degree;
        col.mapv_inplace(|v| v - shift);
    }
    let lf = g.laplacian.dot(&centered);
    let mut raw = Array1::from_elem(d, f64::NAN);
    for r in 0..d {
        let f = centered.column(r);
        let den: f64 = f.iter().zip(g.degrees.iter()).map(|(v, w)| w * v * v).sum();
        if den >= CONSTANT_TOL {
            raw[r] = f.dot(&lf.column(r)) / den;
        }
    }
    let worst = raw
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .unwrap_or(0.0);
    raw.mapv_inplace(|v| if v.is_finite() { v } else { worst });
    Ok(raw)
}

/// The `n_embed` smallest nontrivial generalized eigenvectors of `L y = λ D y`,
/// one per column.
pub fn spectral_embedding(g: &NeighborGraph, n_embed: usize) -> Result<Array2<f64>> {
    let n = g.n_nodes();
    if n_embed == 0 || n_embed > n.saturating_sub(1) {
        return Err(NidfError::input(format!(
            "n_embed = {n_embed} must be in 1..={}",
            n.saturating_sub(1)
        )));
    }
    if !(g.degrees.sum() > 0.0) {
        return Err(NidfError::numeric("graph has zero total degree"));
    }
    let inv_sqrt = g
        .degrees
        .mapv(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 });
    let mut m = g.laplacian.clone();
    for ((i, j), v) in m.indexed_iter_mut() {
        *v *= inv_sqrt[i] * inv_sqrt[j];
    }
    let (_, vecs) = symmetric_eigen(&m).map_err(|e| match e {
        NidfError::Numeric(msg) => NidfError::numeric(format!("MCFS spectral embedding: {msg}")),
        other => other,
    })?;
    let mut y = vecs.slice(ndarray::s![.., 1..=n_embed]).to_owned();
    for (mut row, &s) in y.axis_iter_mut(Axis(0)).zip(inv_sqrt.iter()) {
        row.mapv_inplace(|v| v * s);
    }
    Ok(y)
}

/// `min_a ‖y − X a‖² + gamma·‖a‖₁` by cyclic coordinate descent.
pub fn lasso_cd(x: ArrayView2<f64>, y: ArrayView1<f64>, gamma: f64, tol: f64, max_sweeps: usize) -> Array1<f64> {
    let d = x.ncols();
    let col_sq: Vec<f64> = x.columns().into_iter().map(|c| c.dot(&c)).collect();
    let mut a = Array1::<f64>::zeros(d);
    let mut resid = y.to_owned();
    let thresh = gamma / 2.0;
    for _ in 0..max_sweeps {
        let mut max_change = 0.0f64;
        for r in 0..d {
            if col_sq[r] < CONSTANT_TOL {
                continue;
            }
            let col = x.column(r);
            let old = a[r];
            let rho = col.dot(&resid) + col_sq[r] * old;
            let new = soft_threshold(rho, thresh) / col_sq[r];
            if new != old {
                resid.scaled_add(old - new, &col);
                a[r] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if max_change < tol {
            break;
        }
    }
    a
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Raw MCFS scores, higher is better: `max_k |a_{k,r}|` over the L1
/// regressions of each embedding direction onto the features.
pub fn mcfs_score(x: ArrayView2<f64>, g: &NeighborGraph, n_embed: usize, gamma: f64) -> Result<Array1<f64>> {
    if g.n_nodes() != x.nrows() {
        return Err(NidfError::input(format!(
            "graph has {} nodes for {} samples",
            g.n_nodes(),
            x.nrows()
        )));
    }
    let y = spectral_embedding(g, n_embed)?;
    let coefs: Vec<Array1<f64>> = y
        .columns()
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|yk| lasso_cd(x, yk, gamma, 1e-8, 10_000))
        .collect();
    let mut score = Array1::<f64>::zeros(x.ncols());
    for a in &coefs {
        for (s, v) in score.iter_mut().zip(a.iter()) {
            *s = s.max(v.abs());
        }
    }
    Ok(score)
}

/// Population variance of every column, higher is better.
pub fn variance_score(x: ArrayView2<f64>) -> Array1<f64> {
    x.var_axis(Axis(0), 0.0)
}

/// Orient `raw` so that higher is better and min-max map it to `[0, 1]`.
/// A constant vector maps to all 0.5.
pub fn to_importance(raw: ArrayView1<f64>, orientation: Orientation) -> Array1<f64> {
    let oriented = match orientation {
        Orientation::HigherBetter => raw.to_owned(),
        Orientation::LowerBetter => raw.mapv(|v| -v),
    };
    let lo = oriented.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = oriented.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Array1::from_elem(oriented.len(), 0.5);
    }
    oriented.mapv(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
}

/// Run `selector` on one dataset and return its normalized importance.
pub fn score_matrix(
    x: &DataMatrix,
    selector: SelectorKind,
    cfg: &SelectorConfig,
    source: ScoreSource,
) -> Result<FeatureScore> {
    let values = x.values().view();
    let raw = match selector {
        SelectorKind::Variance => variance_score(values),
        SelectorKind::LapScore => {
            let g = NeighborGraph::build(values, cfg.graph_k, cfg.bandwidth)?;
            laplacian_score(values, &g)?
        }
        SelectorKind::Mcfs => {
            let g = NeighborGraph::build(values, cfg.graph_k, cfg.bandwidth)?;
            let n_embed = cfg.n_embed.unwrap_or(SelectorConfig::DEFAULT_N_EMBED);
            mcfs_score(values, &g, n_embed, cfg.gamma)?
        }
    };
    Ok(FeatureScore {
        values: to_importance(raw.view(), selector.orientation()),
        selector: Some(selector),
        source,
        normalized: true,
    })
}

/// Score every view independently (each with its own graph), in view order.
pub fn score_views(
    views: &IntervalViews,
    selector: SelectorKind,
    cfg: &SelectorConfig,
) -> Result<Vec<FeatureScore>> {
    views
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(kind, x)| {
            score_matrix(x, selector, cfg, ScoreSource::View(kind)).map_err(|e| NidfError::View {
                view: kind,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::{build_views, IntervalConfig};
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn two_clusters(seed: u64) -> Array2<f64> {
        // column 0: cluster indicator, column 1: pure noise
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((40, 2), |(i, j)| {
            if j == 0 {
                if i < 20 { 0.0 } else { 8.0 }
            } else {
                rng.sample::<f64, _>(StandardNormal)
            }
        })
    }

    #[test]
    fn to_importance_endpoints() {
        assert_eq!(to_importance(array![2.0, 4.0, 6.0].view(), Orientation::HigherBetter), array![0.0, 0.5, 1.0]);
        assert_eq!(to_importance(array![2.0, 4.0, 6.0].view(), Orientation::LowerBetter), array![1.0, 0.5, 0.0]);
        assert_eq!(to_importance(array![7.0, 7.0, 7.0].view(), Orientation::HigherBetter), array![0.5, 0.5, 0.5]);
    }

    #[test]
    fn variance_scores() {
        let x = array![[3.0, 0.0], [3.0, 2.0]];
        let v = variance_score(x.view());
        assert_eq!(v, array![0.0, 1.0]);
        let doubled = &x * 2.0;
        assert_eq!(variance_score(doubled.view())[1], 4.0);
    }

    #[test]
    fn lapscore_constant_feature_gets_worst() {
        let mut x = two_clusters(1);
        x.column_mut(1).fill(3.0);
        let mut x3 = Array2::zeros((40, 3));
        x3.slice_mut(ndarray::s![.., 0..2]).assign(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        x3.column_mut(2).mapv_inplace(|_| rng.random_range(-1.0..1.0));
        let g = NeighborGraph::build(x3.view(), 5, Bandwidth::Auto).unwrap();
        let raw = laplacian_score(x3.view(), &g).unwrap();
        assert_eq!(raw[1], raw[0].max(raw[2]));
    }

    #[test]
    fn lapscore_prefers_cluster_feature_over_noise() {
        let x = two_clusters(2);
        let g = NeighborGraph::build(x.view(), 5, Bandwidth::Auto).unwrap();
        let raw = laplacian_score(x.view(), &g).unwrap();
        assert!(raw[0] < raw[1], "{raw:?}");
    }

    #[test]
    fn lapscore_scale_invariant_for_fixed_graph() {
        let x = two_clusters(3);
        let g = NeighborGraph::build(x.view(), 5, Bandwidth::Auto).unwrap();
        let raw = laplacian_score(x.view(), &g).unwrap();
        let mut scaled = x.clone();
        scaled.column_mut(1).mapv_inplace(|v| 5.0 * v);
        let raw2 = laplacian_score(scaled.view(), &g).unwrap();
        assert!((raw[1] - raw2[1]).abs() < 1e-10);
    }

    #[test]
    fn lapscore_zero_graph_is_numeric_error() {
        let x = array![[0.0], [1.0], [2.0]];
        let g = NeighborGraph {
            k: 1,
            neighbor_indices: Array2::zeros((3, 1)),
            affinity: Array2::zeros((3, 3)),
            degrees: Array1::zeros(3),
            laplacian: Array2::zeros((3, 3)),
        };
        let err = laplacian_score(x.view(), &g).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn mcfs_total_shrinkage() {
        let x = two_clusters(4);
        let g = NeighborGraph::build(x.view(), 5, Bandwidth::Auto).unwrap();
        let s = mcfs_score(x.view(), &g, 2, 1e12).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mcfs_finds_feature_equal_to_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = Array2::from_shape_fn((60, 3), |_| rng.random_range(-1.0..1.0));
        let g = NeighborGraph::build(base.view(), 6, Bandwidth::Auto).unwrap();
        let emb = spectral_embedding(&g, 1).unwrap();
        let y = emb.column(0);
        // feature 2 is the embedding itself, the rest is noise
        let x = Array2::from_shape_fn((60, 5), |(i, j)| {
            if j == 2 { y[i] } else { 0.05 * rng.sample::<f64, _>(StandardNormal) }
        });
        let s = mcfs_score(x.view(), &g, 1, 1e-4).unwrap();
        let best = s.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(best, 2, "{s:?}");
        assert!(s.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn embedding_is_generalized_eigenvector() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = Array2::from_shape_fn((25, 2), |_| rng.random_range(-1.0..1.0));
        let g = NeighborGraph::build(p.view(), 4, Bandwidth::Auto).unwrap();
        let y = spectral_embedding(&g, 2).unwrap();
        for col in y.columns() {
            let ly = g.laplacian.dot(&col);
            let dy = &g.degrees * &col;
            let lambda = col.dot(&ly) / col.dot(&dy);
            for (a, b) in ly.iter().zip(dy.iter()) {
                assert!((a - lambda * b).abs() < 1e-8);
            }
            assert!(lambda > 1e-10);
        }
    }

    #[test]
    fn mcfs_rejects_oversized_embedding() {
        let x = array![[0.0], [1.0], [2.0]];
        let g = NeighborGraph::build(x.view(), 1, Bandwidth::Auto).unwrap();
        assert!(mcfs_score(x.view(), &g, 3, 0.1).is_err());
    }

    #[test]
    fn lasso_matches_closed_form_on_orthogonal_design() {
        // orthogonal columns: a_r = soft(x_rᵀy, γ/2) / ‖x_r‖²
        let x = array![[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]];
        let y = array![3.0, 1.0, 5.0];
        let a = lasso_cd(x.view(), y.view(), 1.0, 1e-12, 100);
        assert!((a[0] - 2.5).abs() < 1e-12);
        assert!((a[1] - 1.5 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn identical_views_give_identical_scores() {
        let x = DataMatrix::new(two_clusters(7)).unwrap();
        let views = IntervalViews::from_parts([x.clone(), x.clone(), x.clone(), x.clone()]).unwrap();
        for sel in [SelectorKind::LapScore, SelectorKind::Mcfs, SelectorKind::Variance] {
            let cfg = SelectorConfig { n_embed: Some(2), ..Default::default() };
            let s = score_views(&views, sel, &cfg).unwrap();
            assert_eq!(s.len(), 4);
            for v in &s {
                assert_eq!(v.values, s[0].values);
                assert_eq!(v.len(), 2);
            }
        }
    }

    #[test]
    fn view_errors_are_tagged() {
        let x = DataMatrix::new(array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]).unwrap();
        let views = IntervalViews::from_parts([x.clone(), x.clone(), x.clone(), x]).unwrap();
        let cfg = SelectorConfig { graph_k: 5, ..Default::default() };
        let err = score_views(&views, SelectorKind::LapScore, &cfg).unwrap_err();
        assert!(matches!(err, NidfError::View { view: ViewKind::SampleLow, .. }), "{err}");
    }

    #[test]
    fn lapscore_argmax_survives_column_scaling() {
        // each view builds its own graph from every column, so the invariance
        // holds once z-scoring has removed the scale
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let raw = Array2::from_shape_fn((50, 6), |(i, j)| {
            let cluster = if i < 25 { 0.0 } else { 1.0 };
            if j == 0 { 4.0 * cluster + rng.random_range(-0.3..0.3) } else { rng.random_range(-1.0..1.0) }
        });
        let mut scaled = raw.clone();
        scaled.column_mut(0).mapv_inplace(|e| 3.0 * e);
        let icfg = IntervalConfig { k: 3, ..Default::default() };
        let run = |m: Array2<f64>| {
            let x = crate::data::zscore_normalize(&DataMatrix::new(m).unwrap());
            let views = build_views(&x, &icfg).unwrap();
            score_views(&views, SelectorKind::LapScore, &SelectorConfig::default()).unwrap()
        };
        let (s, s2) = (run(raw), run(scaled));
        let argmax = |v: &Array1<f64>| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        for (a, b) in s.iter().zip(&s2) {
            assert_eq!(argmax(&a.values), argmax(&b.values));
        }
    }

    proptest! {
        #[test]
        fn lapscore_raw_in_unit_interval_times_two(seed in any::<u64>(), n in 5usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((n, 4), |_| rng.random_range(-1.0..1.0));
            let g = NeighborGraph::build(x.view(), 3, Bandwidth::Auto).unwrap();
            let raw = laplacian_score(x.view(), &g).unwrap();
            for v in raw.iter() {
                prop_assert!(*v >= -1e-8 && *v <= 2.0 + 1e-8);
            }
        }

        #[test]
        fn importance_is_unit_range_and_order_preserving(raw in proptest::collection::vec(-100.0f64..100.0, 2..30), lower in any::<bool>()) {
            let raw = Array1::from(raw);
            let orient = if lower { Orientation::LowerBetter } else { Orientation::HigherBetter };
            let imp = to_importance(raw.view(), orient);
            let lo = imp.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = imp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if raw.iter().all(|&v| v == raw[0]) {
                prop_assert!(imp.iter().all(|&v| v == 0.5));
            } else {
                prop_assert_eq!(lo, 0.0);
                prop_assert_eq!(hi, 1.0);
            }
            for i in 0..raw.len() {
                for j in 0..raw.len() {
                    let better = if lower { raw[i] < raw[j] } else { raw[i] > raw[j] };
                    if better {
                        prop_assert!(imp[i] >= imp[j]);
                    }
                }
            }
        }
    }
}
