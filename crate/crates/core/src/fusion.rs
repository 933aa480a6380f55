//! Fusion of per-view scores and redundancy matrices into one feature score.
//!
//! Minimizes
//!
//! ```text
//! J(λ, z, w) = λ² Σ_i w_i² zᵀA_i z − λ Σ_i w_i zᵀs_i
//! ```
//!
//! over `λ ≥ 0` and `z`, `w` on their probability simplices by cycling
//! through three block updates: a closed form for `λ`, then two convex
//! simplex-constrained QPs for `z` and `w`. Each block update minimizes `J`
//! in its own variable, so `J` never increases.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{NidfError, Result};
use crate::linalg::quad_form;
use crate::selectors::{FeatureScore, ScoreSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    /// Stop when `|λ_t − λ_{t−1}| / max(1, |λ_{t−1}|)` drops below this.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Stop a QP when the projected step norm drops below this.
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    /// λ used when `zᵀAz` vanishes.
    pub lambda_floor: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-6,
            outer_max_iter: 100,
            qp_tol: 1e-8,
            qp_max_iter: 5000,
            lambda_floor: 0.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0 && self.qp_tol > 0.0) {
            return Err(NidfError::input("fusion tolerances must be positive"));
        }
        if self.outer_max_iter == 0 || self.qp_max_iter == 0 {
            return Err(NidfError::input("fusion iteration caps must be positive"));
        }
        if !(self.lambda_floor >= 0.0) {
            return Err(NidfError::input("lambda_floor must be nonnegative"));
        }
        Ok(())
    }
}

/// Result of one simplex-constrained QP solve.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto `{x : x ≥ 0, Σx = 1}` by sorting and thresholding.
pub fn project_simplex(v: ArrayView1<f64>) -> Array1<f64> {
    let theta = simplex_threshold(v);
    v.mapv(|e| (e - theta).max(0.0))
}

/// The threshold `θ` with `Σ max(v_i − θ, 0) = 1`.
pub fn simplex_threshold(v: ArrayView1<f64>) -> f64 {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    theta
}

fn qp_objective(q: &Array2<f64>, c: &Array1<f64>, x: &Array1<f64>) -> f64 {
    quad_form(q, x) - c.dot(x)
}

/// Spectral-norm estimate of a PSD matrix by 50 power iterations.
fn spectral_norm_estimate(q: &Array2<f64>) -> f64 {
    let n = q.nrows();
    // slightly uneven start so symmetric structure cannot hide the top direction
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + 0.01 * ((i * 7919) % 13) as f64);
    let mut norm = v.dot(&v).sqrt();
    v /= norm;
    let mut est = 0.0;
    for _ in 0..50 {
        let qv = q.dot(&v);
        norm = qv.dot(&qv).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        est = norm;
        v = qv / norm;
    }
    est
}

/// One-hot vector at the first maximum of `c`.
fn lp_vertex(c: &Array1<f64>) -> Array1<f64> {
    let mut best = 0;
    for (i, &v) in c.iter().enumerate() {
        if v > c[best] {
            best = i;
        }
    }
    let mut x = Array1::zeros(c.len());
    x[best] = 1.0;
    x
}

const LIPSCHITZ_FLOOR: f64 = 1e-12;

/// Minimize `xᵀQx − cᵀx` over the probability simplex, starting from the
/// uniform vector.
pub fn solve_simplex_qp(q: &Array2<f64>, c: &Array1<f64>, cfg: &FusionConfig) -> QpSolution {
    let n = c.len();
    let start = Array1::from_elem(n, 1.0 / n as f64);
    solve_simplex_qp_from(q, c, &start, cfg)
}

/// Projected gradient descent from `start` with step `1/(2L̂)`.
///
/// The returned objective never exceeds the objective at `start`: a step that
/// would increase it is retried at half length.
pub fn solve_simplex_qp_from(
    q: &Array2<f64>,
    c: &Array1<f64>,
    start: &Array1<f64>,
    cfg: &FusionConfig,
) -> QpSolution {
    let lip = spectral_norm_estimate(q);
    if lip <= LIPSCHITZ_FLOOR {
        let x = lp_vertex(c);
        let objective = qp_objective(q, c, &x);
        return QpSolution {
            x,
            objective,
            iterations: 0,
            converged: true,
        };
    }
    let mut step = 1.0 / (2.0 * lip);
    let mut x = project_simplex(start.view());
    let mut f = qp_objective(q, c, &x);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.qp_max_iter {
        iterations += 1;
        let grad = 2.0 * q.dot(&x) - c;
        let trial = project_simplex((&x - &(step * &grad)).view());
        let f_trial = qp_objective(q, c, &trial);
        let moved = (&trial - &x).mapv(|e| e * e).sum().sqrt();
        if f_trial > f {
            if moved <= cfg.qp_tol {
                converged = true;
                break;
            }
            step *= 0.5;
            continue;
        }
        x = trial;
        f = f_trial;
        if moved <= cfg.qp_tol {
            converged = true;
            break;
        }
    }
    QpSolution {
        x,
        objective: f,
        iterations,
        converged,
    }
}

fn check_lists(a_list: &[Array2<f64>], s_list: &[Array1<f64>]) -> Result<usize> {
    if a_list.is_empty() {
        return Err(NidfError::input("at least one view is required"));
    }
    if a_list.len() != s_list.len() {
        return Err(NidfError::input(format!(
            "{} redundancy matrices but {} score vectors",
            a_list.len(),
            s_list.len()
        )));
    }
    let d = s_list[0].len();
    for (i, (a, s)) in a_list.iter().zip(s_list).enumerate() {
        if a.dim() != (d, d) || s.len() != d {
            return Err(NidfError::input(format!(
                "view {i}: redundancy {:?} and score length {} do not match d = {d}",
                a.dim(),
                s.len()
            )));
        }
    }
    Ok(d)
}

/// `J = λ²·Σ w_i²·zᵀA_i z − λ·Σ w_i·zᵀs_i`.
pub fn objective(
    lambda: f64,
    z: &Array1<f64>,
    w: &Array1<f64>,
    a_list: &[Array2<f64>],
    s_list: &[Array1<f64>],
) -> Result<f64> {
    let d = check_lists(a_list, s_list)?;
    if z.len() != d || w.len() != a_list.len() {
        return Err(NidfError::input(format!(
            "z has length {}, w has length {}; expected {d} and {}",
            z.len(),
            w.len(),
            a_list.len()
        )));
    }
    let (quad, lin) = a_list
        .iter()
        .zip(s_list)
        .zip(w.iter())
        .fold((0.0, 0.0), |(qa, la), ((a, s), &wi)| {
            (qa + wi * wi * quad_form(a, z), la + wi * z.dot(s))
        });
    Ok(lambda * lambda * quad - lambda * lin)
}

/// `A = Σ w_i² A_i`, `s = Σ w_i s_i`.
pub fn aggregate(
    a_list: &[Array2<f64>],
    s_list: &[Array1<f64>],
    w: &Array1<f64>,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let d = check_lists(a_list, s_list)?;
    if w.len() != a_list.len() {
        return Err(NidfError::input(format!(
            "w has length {} for {} views",
            w.len(),
            a_list.len()
        )));
    }
    let mut a = Array2::zeros((d, d));
    let mut s = Array1::zeros(d);
    for ((ai, si), &wi) in a_list.iter().zip(s_list).zip(w.iter()) {
        a.scaled_add(wi * wi, ai);
        s.scaled_add(wi, si);
    }
    Ok((a, s))
}

/// Closed-form minimizer of `λ²·zᵀAz − λ·zᵀs`: `λ = zᵀs / (2·zᵀAz)`.
/// Returns `floor` when `zᵀAz < 1e−12`.
pub fn update_lambda(z: &Array1<f64>, a: &Array2<f64>, s: &Array1<f64>, floor: f64) -> f64 {
    let curvature = quad_form(a, z);
    if curvature < 1e-12 {
        return floor;
    }
    z.dot(s) / (2.0 * curvature)
}

/// Minimize `λ·zᵀAz − zᵀs` over the simplex. With `λ = 0` the problem is
/// linear and the answer is the vertex at the first maximum of `s`.
pub fn update_z(lambda: f64, a: &Array2<f64>, s: &Array1<f64>, cfg: &FusionConfig) -> QpSolution {
    let d = s.len();
    update_z_from(lambda, a, s, &Array1::from_elem(d, 1.0 / d as f64), cfg)
}

fn update_z_from(
    lambda: f64,
    a: &Array2<f64>,
    s: &Array1<f64>,
    start: &Array1<f64>,
    cfg: &FusionConfig,
) -> QpSolution {
    if lambda <= 0.0 {
        let x = lp_vertex(s);
        let objective = -s.dot(&x);
        return QpSolution {
            x,
            objective,
            iterations: 0,
            converged: true,
        };
    }
    solve_simplex_qp_from(&(lambda * a), s, start, cfg)
}

/// `H = diag(zᵀA_i z)`, `f_i = zᵀs_i`.
pub fn build_weight_system(
    z: &Array1<f64>,
    a_list: &[Array2<f64>],
    s_list: &[Array1<f64>],
) -> Result<(Array2<f64>, Array1<f64>)> {
    let d = check_lists(a_list, s_list)?;
    if z.len() != d {
        return Err(NidfError::input(format!("z has length {}, expected {d}", z.len())));
    }
    let v = a_list.len();
    let mut h = Array2::zeros((v, v));
    let mut f = Array1::zeros(v);
    for (i, (a, s)) in a_list.iter().zip(s_list).enumerate() {
        h[[i, i]] = quad_form(a, z).max(0.0);
        f[i] = z.dot(s);
    }
    Ok((h, f))
}

/// Minimize `λ·wᵀHw − fᵀw` over the view simplex.
pub fn update_w(lambda: f64, h: &Array2<f64>, f: &Array1<f64>, cfg: &FusionConfig) -> QpSolution {
    let v = f.len();
    update_z_from(lambda, h, f, &Array1::from_elem(v, 1.0 / v as f64), cfg)
}

/// Optimizer state after [`run_nidf`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionState {
    pub lambda: f64,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// Outer iterations performed.
    pub iteration: usize,
    /// `J` after every block update, three entries per outer iteration.
    pub objective_history: Vec<f64>,
    pub converged: bool,
    /// Number of inner QP solves that hit `qp_max_iter`.
    pub qp_unconverged: usize,
}

/// Alternate λ, z and w updates until λ settles.
///
/// `z` and `w` start uniform. Inside the loop each QP is warm-started from
/// the current iterate so that every block update is a descent step.
pub fn run_nidf(
    a_list: &[Array2<f64>],
    s_list: &[Array1<f64>],
    cfg: &FusionConfig,
) -> Result<(FeatureScore, FusionState)> {
    cfg.validate()?;
    let d = check_lists(a_list, s_list)?;
    let v = a_list.len();
    let mut z = Array1::from_elem(d, 1.0 / d as f64);
    let mut w = Array1::from_elem(v, 1.0 / v as f64);
    let mut lambda = 0.0;
    let mut prev_lambda: Option<f64> = None;
    let mut history = Vec::with_capacity(3 * cfg.outer_max_iter);
    let mut converged = false;
    let mut qp_unconverged = 0;
    let mut iteration = 0;

    while iteration < cfg.outer_max_iter {
        iteration += 1;

        let (a, s) = aggregate(a_list, s_list, &w)?;
        lambda = update_lambda(&z, &a, &s, cfg.lambda_floor);
        history.push(objective(lambda, &z, &w, a_list, s_list)?);

        let sol = update_z_from(lambda, &a, &s, &z, cfg);
        qp_unconverged += usize::from(!sol.converged);
        z = sol.x;
        history.push(objective(lambda, &z, &w, a_list, s_list)?);

        let (h, f) = build_weight_system(&z, a_list, s_list)?;
        let sol = update_z_from(lambda, &h, &f, &w, cfg);
        qp_unconverged += usize::from(!sol.converged);
        w = sol.x;
        history.push(objective(lambda, &z, &w, a_list, s_list)?);

        if let Some(prev) = prev_lambda {
            if (lambda - prev).abs() / prev.abs().max(1.0) < cfg.outer_tol {
                converged = true;
                break;
            }
        }
        prev_lambda = Some(lambda);
    }

    let score = FeatureScore {
        values: z.clone(),
        selector: None,
        source: ScoreSource::Fused,
        normalized: false,
    };
    let state = FusionState {
        lambda,
        z: z.to_vec(),
        w: w.to_vec(),
        iteration,
        objective_history: history,
        converged,
        qp_unconverged,
    };
    Ok((score, state))
}

/// Indices of the `m` largest scores, best first; ties go to the lower index.
pub fn rank_features(z: ArrayView1<f64>, m: usize) -> Result<Vec<usize>> {
    let d = z.len();
    if m == 0 || m > d {
        return Err(NidfError::input(format!("cannot select m = {m} of {d} features")));
    }
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    idx.truncate(m);
    Ok(idx)
}
