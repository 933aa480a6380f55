//! Clustering-based evaluation of a feature ranking.
//!
//! For every `m` in a grid, the top-`m` features are clustered with k-means
//! several times; each run is compared against the true labels by ACC (best
//! one-to-one cluster/class matching) and NMI.

use std::time::Instant;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{NidfError, Result};
use crate::fusion::rank_features;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub n_clusters: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            n_clusters: 2,
            restarts: 20,
            max_iter: 300,
            seed: 0,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(NidfError::input("n_clusters must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(NidfError::input("restarts must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(NidfError::input("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// splitmix64 finalizer.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic child seed for stream `(a, b)` of a master seed.
pub fn child_seed(master: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(master) ^ a) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub centroids: Array2<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp_init(x: ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // every point coincides with a center already
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select(ndarray::Axis(0), &chosen)
}

fn lloyd(x: ArrayView2<f64>, mut centroids: Array2<f64>, max_iter: usize) -> KMeansResult {
    let (n, dim) = x.dim();
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut best_dist = vec![0.0; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let (mut arg, mut best) = (0, f64::INFINITY);
            for c in 0..k {
                let d = sq_dist(x.row(i), centroids.row(c));
                if d < best {
                    best = d;
                    arg = c;
                }
            }
            best_dist[i] = best;
            if labels[i] != arg {
                labels[i] = arg;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            sums.row_mut(labels[i]).scaled_add(1.0, &x.row(i));
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.row_mut(c).assign(&(&sums.row(c) / counts[c] as f64));
            } else {
                // re-seed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| best_dist[a].total_cmp(&best_dist[b]).then(b.cmp(&a)))
                    .expect("n > 0");
                centroids.row_mut(c).assign(&x.row(far));
                best_dist[far] = 0.0;
                labels[far] = usize::MAX;
            }
        }
    }
    // final assignment against the final centroids
    let mut inertia = 0.0;
    for i in 0..n {
        let (mut arg, mut best) = (0, f64::INFINITY);
        for c in 0..k {
            let d = sq_dist(x.row(i), centroids.row(c));
            if d < best {
                best = d;
                arg = c;
            }
        }
        labels[i] = arg;
        inertia += best;
    }
    KMeansResult {
        labels,
        inertia,
        centroids,
    }
}

/// One k-means++ seeded Lloyd run.
pub fn kmeans_single(x: ArrayView2<f64>, n_clusters: usize, max_iter: usize, seed: u64) -> Result<KMeansResult> {
    let n = x.nrows();
    if n_clusters == 0 || n_clusters > n {
        return Err(NidfError::input(format!(
            "cannot form {n_clusters} clusters from {n} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = kmeans_pp_init(x, n_clusters, &mut rng);
    Ok(lloyd(x, init, max_iter))
}

/// Best of `cfg.restarts` seeded runs by within-cluster sum of squares.
pub fn kmeans(x: ArrayView2<f64>, cfg: &KMeansConfig) -> Result<KMeansResult> {
    cfg.validate()?;
    if cfg.n_clusters > x.nrows() {
        return Err(NidfError::input(format!(
            "cannot form {} clusters from {} points",
            cfg.n_clusters,
            x.nrows()
        )));
    }
    let runs: Vec<KMeansResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| kmeans_single(x, cfg.n_clusters, cfg.max_iter, child_seed(cfg.seed, 0, r as u64)))
        .collect::<Result<_>>()?;
    Ok(runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("restarts >= 1"))
}

/// Maximum-weight perfect assignment on a square matrix (Hungarian method
/// with potentials, `O(n³)`). Returns `col_of_row`.
pub fn max_weight_assignment(weights: &Array2<f64>) -> Vec<usize> {
    let n = weights.nrows();
    assert_eq!(n, weights.ncols(), "assignment matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| -weights[[i - 1, j - 1]];
    // 1-based arrays, column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            col_of_row[p[j] - 1] = j - 1;
        }
    }
    col_of_row
}

fn check_pair(t: &[usize], p: &[usize]) -> Result<()> {
    if t.len() != p.len() {
        return Err(NidfError::input(format!(
            "label vectors differ in length: {} vs {}",
            t.len(),
            p.len()
        )));
    }
    if t.is_empty() {
        return Err(NidfError::input("empty label vectors"));
    }
    Ok(())
}

/// Contingency table of `(pred, true)` counts over compacted ids.
fn contingency(t: &[usize], p: &[usize]) -> Array2<f64> {
    let compact = |v: &[usize]| -> Vec<usize> {
        let mut ids: Vec<usize> = v.to_vec();
        ids.sort_unstable();
        ids.dedup();
        v.iter().map(|x| ids.binary_search(x).expect("present")).collect()
    };
    let (tc, pc) = (compact(t), compact(p));
    let rows = pc.iter().max().map_or(0, |m| m + 1);
    let cols = tc.iter().max().map_or(0, |m| m + 1);
    let mut table = Array2::zeros((rows, cols));
    for (&a, &b) in pc.iter().zip(&tc) {
        table[[a, b]] += 1.0;
    }
    table
}

/// Clustering accuracy under the best one-to-one cluster→class map.
pub fn acc(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    check_pair(true_labels, pred_labels)?;
    let table = contingency(true_labels, pred_labels);
    let size = table.nrows().max(table.ncols());
    let mut square = Array2::zeros((size, size));
    square
        .slice_mut(ndarray::s![..table.nrows(), ..table.ncols()])
        .assign(&table);
    let assign = max_weight_assignment(&square);
    let matched: f64 = assign.iter().enumerate().map(|(r, &c)| square[[r, c]]).sum();
    Ok(matched / true_labels.len() as f64)
}

/// `MI(C, C') / max(H(C), H(C'))` with natural logarithms.
///
/// When both labelings are single-cluster the entropies vanish and the
/// result is 1 (they are then the same partition).
pub fn nmi(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    check_pair(true_labels, pred_labels)?;
    let table = contingency(true_labels, pred_labels);
    let n = true_labels.len() as f64;
    let row = table.sum_axis(ndarray::Axis(1)) / n;
    let col = table.sum_axis(ndarray::Axis(0)) / n;
    let entropy = |p: &ndarray::Array1<f64>| -> f64 {
        p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
    };
    let (hp, ht) = (entropy(&row), entropy(&col));
    let denom = hp.max(ht);
    if denom <= 0.0 {
        // both single-cluster: identical as partitions
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for ((i, j), &c) in table.indexed_iter() {
        if c > 0.0 {
            let pij = c / n;
            mi += pij * (pij / (row[i] * col[j])).ln();
        }
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsAtM {
    pub m: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_m: Vec<MetricsAtM>,
    pub acc_avg: f64,
    pub nmi_avg: f64,
    pub method_id: String,
    pub dataset_id: String,
    pub runtime_ms: u64,
}

/// `10, 20, …, 100` clipped to `d`; `[d]` when `d < 10`.
pub fn default_m_grid(d: usize) -> Vec<usize> {
    let grid: Vec<usize> = (1..=10).map(|i| 10 * i).filter(|&m| m <= d).collect();
    if grid.is_empty() {
        vec![d]
    } else {
        grid
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Cluster the top-`m` columns for every `m` in `m_grid`, `kcfg.restarts`
/// single-initialization runs each, and average ACC/NMI per `m`.
///
/// Run `r` at grid position `g` uses seed `child_seed(kcfg.seed, g, r)`.
/// Standard deviations are population standard deviations over restarts.
pub fn evaluate_selection(
    x: &DataMatrix,
    score: ArrayView1<f64>,
    m_grid: &[usize],
    kcfg: &KMeansConfig,
) -> Result<EvalReport> {
    let start = Instant::now();
    kcfg.validate()?;
    let labels = x
        .labels()
        .ok_or_else(|| NidfError::input("labels required for eval"))?;
    if score.len() != x.n_features() {
        return Err(NidfError::input(format!(
            "score has {} entries for {} features",
            score.len(),
            x.n_features()
        )));
    }
    if m_grid.is_empty() {
        return Err(NidfError::input("empty m grid"));
    }
    let ranking = rank_features(score, x.n_features())?;
    let mut per_m = Vec::with_capacity(m_grid.len());
    for (g, &m) in m_grid.iter().enumerate() {
        if m == 0 || m > x.n_features() {
            return Err(NidfError::input(format!(
                "m = {m} outside 1..={}",
                x.n_features()
            )));
        }
        let cols = x.values().select(ndarray::Axis(1), &ranking[..m]);
        let runs: Vec<(f64, f64)> = (0..kcfg.restarts)
            .into_par_iter()
            .map(|r| {
                let seed = child_seed(kcfg.seed, g as u64, r as u64);
                let km = kmeans_single(cols.view(), kcfg.n_clusters, kcfg.max_iter, seed)?;
                Ok((acc(labels, &km.labels)?, nmi(labels, &km.labels)?))
            })
            .collect::<Result<_>>()?;
        let accs: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let nmis: Vec<f64> = runs.iter().map(|r| r.1).collect();
        let (acc_mean, acc_std) = mean_std(&accs);
        let (nmi_mean, nmi_std) = mean_std(&nmis);
        per_m.push(MetricsAtM {
            m,
            acc_mean,
            acc_std,
            nmi_mean,
            nmi_std,
        });
    }
    let acc_avg = per_m.iter().map(|r| r.acc_mean).sum::<f64>() / per_m.len() as f64;
    let nmi_avg = per_m.iter().map(|r| r.nmi_mean).sum::<f64>() / per_m.len() as f64;
    Ok(EvalReport {
        per_m,
        acc_avg,
        nmi_avg,
        method_id: String::new(),
        dataset_id: String::new(),
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}
