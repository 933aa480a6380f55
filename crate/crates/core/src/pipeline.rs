//! End-to-end runs: configuration, artifact formats and the commands behind
//! the `nidf` binary.
//!
//! Artifacts written for a dataset `name.csv` into the output directory:
//!
//! | file | contents |
//! |------|----------|
//! | `name.{slow,sup,flow,fup}.csv` | the four interval views |
//! | `name.{tag}.score.csv` | `feature_id,score` per view (`tag = original` for the raw selector) |
//! | `name.z.csv` | fused `feature_id,score` |
//! | `name.fusion.json` | `{lambda, w, iterations, converged, objective_history}` |
//! | `name.report.json` | evaluation report |
//! | `bench.csv` | comparison table with an `AVERAGE` row |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, DataMatrix, LabelColumn, Normalization};
use crate::error::{NidfError, Result};
use crate::eval::{default_m_grid, evaluate_selection, EvalReport, KMeansConfig, MetricsAtM};
use crate::fusion::{run_nidf, FusionConfig, FusionState};
use crate::interval::{build_views, IntervalConfig, IntervalViews, ViewKind};
use crate::redundancy::{psd_repair, AbsCorrelation, RedundancyBuilder, RedundancyMatrix, DEFAULT_RIDGE};
use crate::selectors::{score_matrix, score_views, FeatureScore, ScoreSource, SelectorConfig, SelectorKind};

/// Whether a run clusters the selected features against labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Evaluate when the dataset has labels.
    #[default]
    Auto,
    /// Always evaluate; unlabeled data is an error.
    On,
    Off,
}

impl FromStr for EvalMode {
    type Err = NidfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(EvalMode::Auto),
            "on" | "true" => Ok(EvalMode::On),
            "off" | "false" => Ok(EvalMode::Off),
            other => Err(NidfError::input(format!("unknown eval mode '{other}'"))),
        }
    }
}

/// Every knob of a run. Defaults: interval `k = 15`, `α = 3`, 20 k-means
/// restarts and the `10:10:100` feature-count grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub normalize: Normalization,
    pub interval: IntervalConfig,
    pub selector: SelectorKind,
    pub selector_params: SelectorConfig,
    pub redundancy_eps: f64,
    pub fusion: FusionConfig,
    pub restarts: usize,
    pub kmeans_max_iter: usize,
    /// `None` selects [`default_m_grid`].
    pub m_grid: Option<Vec<usize>>,
    pub eval: EvalMode,
    pub seed: u64,
    /// Record wall-clock time in reports. Off by default so that reports are
    /// byte-reproducible.
    pub timing: bool,
    pub label_col: Option<LabelColumn>,
    pub has_header: bool,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            normalize: Normalization::Zscore,
            interval: IntervalConfig::default(),
            selector: SelectorKind::LapScore,
            selector_params: SelectorConfig::default(),
            redundancy_eps: DEFAULT_RIDGE,
            fusion: FusionConfig::default(),
            restarts: 20,
            kmeans_max_iter: 300,
            m_grid: None,
            eval: EvalMode::Auto,
            seed: 0,
            timing: false,
            label_col: None,
            has_header: true,
            out_dir: PathBuf::from("."),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| NidfError::input(format!("bad value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(NidfError::input(format!("bad boolean '{value}' for {key}"))),
    }
}

/// Parse `"10,20,30"` or the range form `"10:10:100"` (start:step:stop).
pub fn parse_m_grid(value: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let grid: Vec<usize> = if parts.len() == 3 {
        let start: usize = parse("m_grid", parts[0])?;
        let step: usize = parse("m_grid", parts[1])?;
        let stop: usize = parse("m_grid", parts[2])?;
        if step == 0 {
            return Err(NidfError::input("m_grid step must be positive"));
        }
        (start..=stop).step_by(step).collect()
    } else {
        value
            .split(',')
            .map(|p| parse("m_grid", p.trim()))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.contains(&0) {
        return Err(NidfError::input(format!("bad m grid '{value}'")));
    }
    Ok(grid)
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "normalize" => self.normalize = value.parse()?,
            "interval.k" => self.interval.k = parse(key, value)?,
            "interval.alpha" => self.interval.alpha = parse(key, value)?,
            "interval.scale_rule" => self.interval.scale_rule = value.parse()?,
            "interval.include_self" => self.interval.include_self = parse_bool(key, value)?,
            "selector" => self.selector = value.parse()?,
            "graph.k" => self.selector_params.graph_k = parse(key, value)?,
            "graph.bandwidth" => self.selector_params.bandwidth = value.parse()?,
            "mcfs.n_embed" => {
                self.selector_params.n_embed = if value == "auto" { None } else { Some(parse(key, value)?) }
            }
            "mcfs.gamma" => self.selector_params.gamma = parse(key, value)?,
            "redundancy.eps" => self.redundancy_eps = parse(key, value)?,
            "fusion.outer_tol" => self.fusion.outer_tol = parse(key, value)?,
            "fusion.outer_max_iter" => self.fusion.outer_max_iter = parse(key, value)?,
            "fusion.qp_tol" => self.fusion.qp_tol = parse(key, value)?,
            "fusion.qp_max_iter" => self.fusion.qp_max_iter = parse(key, value)?,
            "fusion.lambda_floor" => self.fusion.lambda_floor = parse(key, value)?,
            "eval" => self.eval = value.parse()?,
            "eval.restarts" => self.restarts = parse(key, value)?,
            "eval.max_iter" => self.kmeans_max_iter = parse(key, value)?,
            "eval.m_grid" => {
                self.m_grid = if value == "auto" { None } else { Some(parse_m_grid(value)?) }
            }
            "seed" => self.seed = parse(key, value)?,
            "timing" => self.timing = parse_bool(key, value)?,
            "label_col" => {
                self.label_col = if value.is_empty() { None } else { Some(value.parse()?) }
            }
            "has_header" => self.has_header = parse_bool(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(NidfError::input(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Apply a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                NidfError::input(format!("config line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| NidfError::io(path, e))?;
        self.apply_text(&text)
    }

    /// The settings as a config text that [`RunConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("normalize", self.normalize.to_string());
        kv("interval.k", self.interval.k.to_string());
        kv("interval.alpha", format!("{:?}", self.interval.alpha));
        kv("interval.scale_rule", self.interval.scale_rule.to_string());
        kv("interval.include_self", self.interval.include_self.to_string());
        kv("selector", self.selector.to_string());
        kv("graph.k", self.selector_params.graph_k.to_string());
        kv("graph.bandwidth", self.selector_params.bandwidth.to_string());
        kv(
            "mcfs.n_embed",
            self.selector_params.n_embed.map_or("auto".into(), |n| n.to_string()),
        );
        kv("mcfs.gamma", format!("{:?}", self.selector_params.gamma));
        kv("redundancy.eps", format!("{:?}", self.redundancy_eps));
        kv("fusion.outer_tol", format!("{:?}", self.fusion.outer_tol));
        kv("fusion.outer_max_iter", self.fusion.outer_max_iter.to_string());
        kv("fusion.qp_tol", format!("{:?}", self.fusion.qp_tol));
        kv("fusion.qp_max_iter", self.fusion.qp_max_iter.to_string());
        kv("fusion.lambda_floor", format!("{:?}", self.fusion.lambda_floor));
        kv(
            "eval",
            match self.eval {
                EvalMode::Auto => "auto",
                EvalMode::On => "on",
                EvalMode::Off => "off",
            }
            .into(),
        );
        kv("eval.restarts", self.restarts.to_string());
        kv("eval.max_iter", self.kmeans_max_iter.to_string());
        kv(
            "eval.m_grid",
            self.m_grid.as_ref().map_or("auto".into(), |g| {
                g.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            }),
        );
        kv("seed", self.seed.to_string());
        kv("timing", self.timing.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.interval.validate()?;
        self.selector_params.validate()?;
        self.fusion.validate()?;
        if !(self.redundancy_eps >= 0.0) {
            return Err(NidfError::input("redundancy.eps must be nonnegative"));
        }
        if self.restarts == 0 || self.kmeans_max_iter == 0 {
            return Err(NidfError::input("eval.restarts and eval.max_iter must be positive"));
        }
        Ok(())
    }

    /// Selector parameters with `n_embed` resolved: the class count when
    /// labels exist, otherwise 5.
    pub fn selector_params_for(&self, x: &DataMatrix) -> SelectorConfig {
        let mut p = self.selector_params;
        if p.n_embed.is_none() {
            p.n_embed = Some(
                x.n_classes()
                    .filter(|&c| c >= 1)
                    .unwrap_or(SelectorConfig::DEFAULT_N_EMBED),
            );
        }
        p
    }

    pub fn m_grid_for(&self, d: usize) -> Vec<usize> {
        match &self.m_grid {
            Some(g) => g.iter().copied().filter(|&m| m <= d).collect(),
            None => default_m_grid(d),
        }
    }

    pub fn kmeans_for(&self, x: &DataMatrix) -> KMeansConfig {
        KMeansConfig {
            n_clusters: x.n_classes().unwrap_or(1).max(1),
            restarts: self.restarts,
            max_iter: self.kmeans_max_iter,
            seed: self.seed,
        }
    }

    pub fn load(&self, path: impl AsRef<Path>) -> Result<DataMatrix> {
        data::load_csv(path, self.label_col.as_ref(), self.has_header)
    }
}

/// Everything produced by the selection half of a run.
#[derive(Debug, Clone)]
pub struct FusionOutcome {
    pub view_scores: Vec<FeatureScore>,
    pub redundancy: Vec<RedundancyMatrix>,
    pub z: FeatureScore,
    pub state: FusionState,
}

/// Per-view redundancy matrices, PSD-repaired.
pub fn redundancy_for_views(views: &IntervalViews, eps: f64) -> Result<Vec<RedundancyMatrix>> {
    views
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(kind, v)| {
            let raw = AbsCorrelation.build(v.values().view(), ScoreSource::View(kind));
            psd_repair(&raw, eps).map_err(|e| NidfError::View {
                view: kind,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Fuse precomputed per-view scores and redundancy matrices.
pub fn fuse(
    view_scores: Vec<FeatureScore>,
    redundancy: Vec<RedundancyMatrix>,
    fusion: &FusionConfig,
) -> Result<FusionOutcome> {
    let a: Vec<Array2<f64>> = redundancy.iter().map(|r| r.values.clone()).collect();
    let s: Vec<Array1<f64>> = view_scores.iter().map(|f| f.values.clone()).collect();
    let (mut z, state) = run_nidf(&a, &s, fusion)?;
    z.selector = view_scores.first().and_then(|f| f.selector);
    Ok(FusionOutcome {
        view_scores,
        redundancy,
        z,
        state,
    })
}

/// Views → per-view scores → per-view redundancy → fusion, on already
/// normalized data.
pub fn select_nidf(x: &DataMatrix, cfg: &RunConfig) -> Result<FusionOutcome> {
    let views = build_views(x, &cfg.interval)?;
    fuse_from_views(&views, &cfg.selector_params_for(x), cfg)
}

pub fn fuse_from_views(
    views: &IntervalViews,
    params: &SelectorConfig,
    cfg: &RunConfig,
) -> Result<FusionOutcome> {
    let scores = score_views(views, cfg.selector, params)?;
    let redundancy = redundancy_for_views(views, cfg.redundancy_eps)?;
    fuse(scores, redundancy, &cfg.fusion)
}

/// The selector on the (normalized) original data only.
pub fn select_raw(x: &DataMatrix, cfg: &RunConfig) -> Result<FeatureScore> {
    score_matrix(x, cfg.selector, &cfg.selector_params_for(x), ScoreSource::Original)
}

/// Output JSON schema for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub method: String,
    pub lambda: Option<f64>,
    pub w: Option<Vec<f64>>,
    pub converged: bool,
    pub per_m: Vec<MetricsAtM>,
    pub acc_avg: f64,
    pub nmi_avg: f64,
    pub runtime_ms: u64,
}

/// JSON sidecar describing the optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSidecar {
    pub lambda: f64,
    pub w: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
}

impl From<&FusionState> for FusionSidecar {
    fn from(s: &FusionState) -> Self {
        Self {
            lambda: s.lambda,
            w: s.w.clone(),
            iterations: s.iteration,
            converged: s.converged,
            objective_history: s.objective_history.clone(),
        }
    }
}

/// Result of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub outcome: FusionOutcome,
    pub ranking: Vec<usize>,
    pub eval: Option<EvalReport>,
    pub report: Option<RunReport>,
}

fn wants_eval(x: &DataMatrix, mode: EvalMode) -> Result<bool> {
    match (mode, x.labels().is_some()) {
        (EvalMode::Off, _) => Ok(false),
        (EvalMode::On, false) => Err(NidfError::input("labels required for eval")),
        (_, has) => Ok(has),
    }
}

pub fn method_name(selector: SelectorKind, fused: bool) -> String {
    if fused {
        format!("{selector}_NIDF")
    } else {
        selector.to_string()
    }
}

/// Evaluate `score` on `x` and wrap the result in the report schema.
pub fn evaluate_score(
    x: &DataMatrix,
    score: &FeatureScore,
    dataset_id: &str,
    method: &str,
    state: Option<&FusionState>,
    cfg: &RunConfig,
) -> Result<(EvalReport, RunReport)> {
    let grid = cfg.m_grid_for(x.n_features());
    let mut eval = evaluate_selection(x, score.values.view(), &grid, &cfg.kmeans_for(x))?;
    eval.method_id = method.to_string();
    eval.dataset_id = dataset_id.to_string();
    if !cfg.timing {
        eval.runtime_ms = 0;
    }
    let report = RunReport {
        dataset: dataset_id.to_string(),
        method: method.to_string(),
        lambda: state.map(|s| s.lambda),
        w: state.map(|s| s.w.clone()),
        converged: state.is_none_or(|s| s.converged),
        per_m: eval.per_m.clone(),
        acc_avg: eval.acc_avg,
        nmi_avg: eval.nmi_avg,
        runtime_ms: eval.runtime_ms,
    };
    Ok((eval, report))
}

/// Normalize, select with interval fusion, rank, and evaluate when labels
/// allow. Nothing is written to disk.
pub fn run_pipeline(raw: &DataMatrix, dataset_id: &str, cfg: &RunConfig) -> Result<PipelineResult> {
    cfg.validate()?;
    let start = Instant::now();
    let evaluate = wants_eval(raw, cfg.eval)?;
    let x = data::normalize(raw, cfg.normalize);
    let outcome = select_nidf(&x, cfg)?;
    let ranking = crate::fusion::rank_features(outcome.z.values.view(), x.n_features())?;
    let (eval, mut report) = if evaluate {
        let method = method_name(cfg.selector, true);
        let (e, r) = evaluate_score(&x, &outcome.z, dataset_id, &method, Some(&outcome.state), cfg)?;
        (Some(e), Some(r))
    } else {
        (None, None)
    };
    if let (Some(r), true) = (report.as_mut(), cfg.timing) {
        r.runtime_ms = start.elapsed().as_millis() as u64;
    }
    Ok(PipelineResult {
        outcome,
        ranking,
        eval,
        report,
    })
}

fn dataset_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| NidfError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| NidfError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| NidfError::input(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| NidfError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| NidfError::input(format!("{}: {e}", path.display())))
}

/// Write `feature_id,score` rows.
pub fn write_scores_csv(path: &Path, ids: &[String], scores: &Array1<f64>) -> Result<()> {
    let mut s = String::from("feature_id,score\n");
    for (id, v) in ids.iter().zip(scores.iter()) {
        let _ = writeln!(s, "{id},{v:?}");
    }
    write_text(path, &s)
}

/// Read a `feature_id,score` file.
pub fn read_scores_csv(path: &Path) -> Result<(Vec<String>, Array1<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| NidfError::input(format!("{}: {e}", path.display())))?;
    let mut ids = Vec::new();
    let mut vals = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| NidfError::input(format!("{}: {e}", path.display())))?;
        if rec.len() != 2 {
            return Err(NidfError::input(format!(
                "{}: expected feature_id,score rows",
                path.display()
            )));
        }
        ids.push(rec[0].to_string());
        let v: f64 = rec[1].parse().map_err(|_| {
            NidfError::input(format!("{}: bad score '{}'", path.display(), &rec[1]))
        })?;
        vals.push(v);
    }
    Ok((ids, Array1::from(vals)))
}

fn feature_ids(x: &DataMatrix) -> Vec<String> {
    (0..x.n_features()).map(|j| x.feature_id(j)).collect()
}

/// Read a view file written by [`cmd_views`]; a trailing `label` column is
/// taken as labels.
pub fn load_view_csv(path: &Path) -> Result<DataMatrix> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| NidfError::input(format!("{}: {e}", path.display())))?;
    let has_label = rdr
        .headers()
        .map(|h| h.iter().any(|c| c.trim() == "label"))
        .unwrap_or(false);
    let lc = has_label.then(|| LabelColumn::Name("label".into()));
    data::load_csv(path, lc.as_ref(), true)
}

fn view_path(dir: &Path, stem: &str, kind: ViewKind) -> PathBuf {
    dir.join(format!("{stem}.{}.csv", kind.tag()))
}

fn score_path(dir: &Path, stem: &str, tag: &str) -> PathBuf {
    dir.join(format!("{stem}.{tag}.score.csv"))
}

/// `nidf views`: write the four interval views of the normalized dataset.
pub fn cmd_views(dataset: &Path, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let x = data::normalize(&cfg.load(dataset)?, cfg.normalize);
    let views = build_views(&x, &cfg.interval)?;
    ensure_dir(&cfg.out_dir)?;
    let stem = dataset_stem(dataset);
    views
        .iter()
        .map(|(kind, v)| {
            let p = view_path(&cfg.out_dir, &stem, kind);
            data::write_csv(v, &p)?;
            Ok(p)
        })
        .collect()
}

/// `nidf score`: one score file per view, plus the raw selector on the
/// original data when `include_original` is set.
pub fn cmd_score(dataset: &Path, include_original: bool, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let x = data::normalize(&cfg.load(dataset)?, cfg.normalize);
    let views = build_views(&x, &cfg.interval)?;
    let params = cfg.selector_params_for(&x);
    let scores = score_views(&views, cfg.selector, &params)?;
    ensure_dir(&cfg.out_dir)?;
    let stem = dataset_stem(dataset);
    let ids = feature_ids(&x);
    let mut written = Vec::new();
    for s in &scores {
        let tag = s.source.to_string();
        let p = score_path(&cfg.out_dir, &stem, &tag);
        write_scores_csv(&p, &ids, &s.values)?;
        written.push(p);
    }
    if include_original {
        let raw = score_matrix(&x, cfg.selector, &params, ScoreSource::Original)?;
        let p = score_path(&cfg.out_dir, &stem, "original");
        write_scores_csv(&p, &ids, &raw.values)?;
        written.push(p);
    }
    Ok(written)
}

/// Paths written by [`cmd_fuse`].
#[derive(Debug, Clone)]
pub struct FuseArtifacts {
    pub z_csv: PathBuf,
    pub sidecar: PathBuf,
    pub state: FusionState,
}

/// `nidf fuse`: fused score `z` and its sidecar.
///
/// With `from_prefix`, views are read from `<prefix>.{tag}.csv` and scores
/// from `<prefix>.{tag}.score.csv` when those exist (recomputed otherwise).
/// Without it everything is recomputed from `dataset`.
pub fn cmd_fuse(dataset: &Path, from_prefix: Option<&Path>, cfg: &RunConfig) -> Result<FuseArtifacts> {
    cfg.validate()?;
    let (x, outcome) = match from_prefix {
        None => {
            let x = data::normalize(&cfg.load(dataset)?, cfg.normalize);
            let o = select_nidf(&x, cfg)?;
            (x, o)
        }
        Some(prefix) => {
            let dir = prefix.parent().unwrap_or(Path::new("."));
            let stem = prefix
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| NidfError::input("empty prefix"))?;
            let views: Vec<DataMatrix> = ViewKind::ALL
                .iter()
                .map(|&k| load_view_csv(&view_path(dir, &stem, k)))
                .collect::<Result<_>>()?;
            let views = IntervalViews::from_parts(
                views.try_into().map_err(|_| NidfError::input("expected four views"))?,
            )?;
            let x = views.get(ViewKind::SampleLow).clone();
            let params = cfg.selector_params_for(&x);
            let mut scores = Vec::with_capacity(4);
            for (kind, v) in views.iter() {
                let p = score_path(dir, &stem, kind.tag());
                let s = if p.exists() {
                    let (_, vals) = read_scores_csv(&p)?;
                    if vals.len() != v.n_features() {
                        return Err(NidfError::input(format!(
                            "{}: {} scores for {} features",
                            p.display(),
                            vals.len(),
                            v.n_features()
                        )));
                    }
                    FeatureScore {
                        values: vals,
                        selector: Some(cfg.selector),
                        source: ScoreSource::View(kind),
                        normalized: true,
                    }
                } else {
                    score_matrix(v, cfg.selector, &params, ScoreSource::View(kind))?
                };
                scores.push(s);
            }
            let red = redundancy_for_views(&views, cfg.redundancy_eps)?;
            (x, fuse(scores, red, &cfg.fusion)?)
        }
    };
    ensure_dir(&cfg.out_dir)?;
    let stem = dataset_stem(dataset);
    let z_csv = cfg.out_dir.join(format!("{stem}.z.csv"));
    let sidecar = cfg.out_dir.join(format!("{stem}.fusion.json"));
    write_scores_csv(&z_csv, &feature_ids(&x), &outcome.z.values)?;
    write_json(&sidecar, &FusionSidecar::from(&outcome.state))?;
    Ok(FuseArtifacts {
        z_csv,
        sidecar,
        state: outcome.state,
    })
}

/// `nidf eval`: evaluate a `feature_id,score` file against the dataset's
/// labels. Optionally writes a one-row bench-style CSV.
pub fn cmd_eval(
    dataset: &Path,
    scores: &Path,
    method: &str,
    csv_row: Option<&Path>,
    cfg: &RunConfig,
) -> Result<RunReport> {
    cfg.validate()?;
    let x = data::normalize(&cfg.load(dataset)?, cfg.normalize);
    if x.labels().is_none() {
        return Err(NidfError::input("labels required for eval"));
    }
    let (_, vals) = read_scores_csv(scores)?;
    let score = FeatureScore {
        values: vals,
        selector: None,
        source: ScoreSource::Fused,
        normalized: false,
    };
    let stem = dataset_stem(dataset);
    let (_, report) = evaluate_score(&x, &score, &stem, method, None, cfg)?;
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join(format!("{stem}.report.json")), &report)?;
    if let Some(p) = csv_row {
        let text = format!(
            "dataset,ACC:{method},NMI:{method}\n{stem},{:?},{:?}\n",
            report.acc_avg, report.nmi_avg
        );
        write_text(p, &text)?;
    }
    Ok(report)
}

/// Paths written by [`cmd_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub z_csv: PathBuf,
    pub sidecar: PathBuf,
    pub report: Option<PathBuf>,
    pub result: PipelineResult,
}

/// `nidf pipeline`: the whole run with artifacts on disk.
pub fn cmd_pipeline(dataset: &Path, cfg: &RunConfig) -> Result<PipelineArtifacts> {
    let raw = cfg.load(dataset)?;
    let stem = dataset_stem(dataset);
    let result = run_pipeline(&raw, &stem, cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let z_csv = cfg.out_dir.join(format!("{stem}.z.csv"));
    let sidecar = cfg.out_dir.join(format!("{stem}.fusion.json"));
    let ids: Vec<String> = (0..raw.n_features()).map(|j| raw.feature_id(j)).collect();
    write_scores_csv(&z_csv, &ids, &result.outcome.z.values)?;
    write_json(&sidecar, &FusionSidecar::from(&result.outcome.state))?;
    let report = match &result.report {
        Some(r) => {
            let p = cfg.out_dir.join(format!("{stem}.report.json"));
            write_json(&p, r)?;
            Some(p)
        }
        None => None,
    };
    Ok(PipelineArtifacts {
        z_csv,
        sidecar,
        report,
        result,
    })
}

/// Comparison table: one row per dataset, one column per (metric, method).
#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub columns: Vec<String>,
    /// `(dataset, cells)`; `None` marks a failed cell.
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl BenchTable {
    /// Column means over the successful cells of each column.
    pub fn average(&self) -> Vec<Option<f64>> {
        (0..self.columns.len())
            .map(|c| {
                let ok: Vec<f64> = self.rows.iter().filter_map(|(_, r)| r[c]).collect();
                (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let fmt_row = |name: &str, cells: &[Option<f64>]| {
            let mut line = name.to_string();
            for c in cells {
                match c {
                    Some(v) => {
                        let _ = write!(line, ",{v:?}");
                    }
                    None => line.push_str(",ERR"),
                }
            }
            line
        };
        let mut s = format!("dataset,{}\n", self.columns.join(","));
        for (name, cells) in &self.rows {
            s.push_str(&fmt_row(name, cells));
            s.push('\n');
        }
        s.push_str(&fmt_row("AVERAGE", &self.average()));
        s.push('\n');
        s
    }

    /// Parse the output of [`BenchTable::to_csv`]; the `AVERAGE` row is
    /// recomputed rather than stored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| NidfError::input("empty bench table"))?;
        let columns: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for line in lines {
            let mut parts = line.split(',');
            let name = parts.next().unwrap_or_default().to_string();
            if name == "AVERAGE" {
                continue;
            }
            let cells: Vec<Option<f64>> = parts
                .map(|p| match p {
                    "ERR" => Ok(None),
                    v => v
                        .parse()
                        .map(Some)
                        .map_err(|_| NidfError::input(format!("bad bench cell '{v}'"))),
                })
                .collect::<Result<_>>()?;
            if cells.len() != columns.len() {
                return Err(NidfError::input(format!("bench row '{name}' has wrong width")));
            }
            rows.push((name, cells));
        }
        Ok(Self { columns, rows })
    }
}

/// Raw-vs-fused comparison over datasets and selectors.
///
/// Every (dataset, selector, raw|fused) cell runs independently. A failed
/// cell shows as `ERR`; the call fails only when no cell succeeded.
pub fn run_bench(
    datasets: &[(String, DataMatrix)],
    selectors: &[SelectorKind],
    cfg: &RunConfig,
) -> Result<BenchTable> {
    cfg.validate()?;
    let methods: Vec<(SelectorKind, bool)> = selectors
        .iter()
        .flat_map(|&s| [(s, false), (s, true)])
        .collect();
    let mut columns = Vec::new();
    for metric in ["ACC", "NMI"] {
        for &(s, fused) in &methods {
            columns.push(format!("{metric}:{}", method_name(s, fused)));
        }
    }
    let cells: Vec<(usize, usize, Option<(f64, f64)>)> = datasets
        .iter()
        .enumerate()
        .flat_map(|(di, _)| (0..methods.len()).map(move |mi| (di, mi)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(di, mi)| {
            let (name, raw) = &datasets[di];
            let (selector, fused) = methods[mi];
            let cell_cfg = RunConfig {
                selector,
                eval: EvalMode::On,
                ..cfg.clone()
            };
            let run = || -> Result<(f64, f64)> {
                if raw.labels().is_none() {
                    return Err(NidfError::input("labels required for eval"));
                }
                let x = data::normalize(raw, cell_cfg.normalize);
                let method = method_name(selector, fused);
                let (report, _) = if fused {
                    let o = select_nidf(&x, &cell_cfg)?;
                    evaluate_score(&x, &o.z, name, &method, Some(&o.state), &cell_cfg)?
                } else {
                    let s = select_raw(&x, &cell_cfg)?;
                    evaluate_score(&x, &s, name, &method, None, &cell_cfg)?
                };
                Ok((report.acc_avg, report.nmi_avg))
            };
            (di, mi, run().ok())
        })
        .collect();
    let n_methods = methods.len();
    let mut rows: Vec<(String, Vec<Option<f64>>)> = datasets
        .iter()
        .map(|(n, _)| (n.clone(), vec![None; 2 * n_methods]))
        .collect();
    let mut any_ok = false;
    for (di, mi, cell) in cells {
        if let Some((a, n)) = cell {
            rows[di].1[mi] = Some(a);
            rows[di].1[n_methods + mi] = Some(n);
            any_ok = true;
        }
    }
    if !any_ok {
        return Err(NidfError::input("every bench cell failed"));
    }
    Ok(BenchTable { columns, rows })
}

/// `nidf bench`: load the datasets, run [`run_bench`], write `bench.csv`.
pub fn cmd_bench(datasets: &[PathBuf], selectors: &[SelectorKind], cfg: &RunConfig) -> Result<(PathBuf, BenchTable)> {
    let loaded: Vec<(String, DataMatrix)> = datasets
        .iter()
        .map(|p| Ok((dataset_stem(p), cfg.load(p)?)))
        .collect::<Result<_>>()?;
    let table = run_bench(&loaded, selectors, cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("bench.csv");
    write_text(&path, &table.to_csv())?;
    Ok((path, table))
}
