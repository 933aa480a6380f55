//! Brute-force k-nearest-neighbor search and heat-kernel graph Laplacians.
//!
//! Distances are computed exhaustively in `O(n² d)`, which is fine for the
//! few-thousand-sample datasets this crate targets but not beyond ~10⁴ rows.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NidfError, Result};

/// Heat-kernel width `t` in `exp(−‖x_i − x_j‖² / 2t²)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Mean Euclidean distance over all listed neighbor pairs.
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::Auto => f.write_str("auto"),
            Bandwidth::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for Bandwidth {
    type Err = NidfError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Bandwidth::Auto);
        }
        s.parse::<f64>()
            .map(Bandwidth::Fixed)
            .map_err(|_| NidfError::input(format!("bad bandwidth '{s}'")))
    }
}

/// A symmetric k-NN affinity graph with its degree vector and Laplacian.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    pub k: usize,
    pub neighbor_indices: Array2<usize>,
    pub affinity: Array2<f64>,
    pub degrees: Array1<f64>,
    pub laplacian: Array2<f64>,
}

impl NeighborGraph {
    /// kNN search, heat-kernel affinity and Laplacian over the rows of `points`.
    pub fn build(points: ArrayView2<f64>, k: usize, bandwidth: Bandwidth) -> Result<Self> {
        let neighbor_indices = knn(points, k)?;
        let affinity = heat_affinity(points, &neighbor_indices, bandwidth)?;
        let (degrees, laplacian) = laplacian(&affinity)?;
        Ok(Self {
            k,
            neighbor_indices,
            affinity,
            degrees,
            laplacian,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.degrees.len()
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest other rows of every row, nearest first.
///
/// Ties in squared distance go to the lower index. `k = 0` yields an empty
/// `n × 0` grid.
pub fn knn(points: ArrayView2<f64>, k: usize) -> Result<Array2<usize>> {
    let n = points.nrows();
    if k >= n {
        return Err(NidfError::input(format!(
            "k = {k} neighbors requested but only {n} points"
        )));
    }
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = points.row(i);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist(pi, points.row(j)), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k > 0 && k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_unstable_by(cmp);
            cand.truncate(k);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    let flat: Vec<usize> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, k), flat).expect("n × k neighbors"))
}

/// Heat-kernel affinity on the OR-symmetrized k-NN graph.
pub fn heat_affinity(
    points: ArrayView2<f64>,
    neighbors: &Array2<usize>,
    bandwidth: Bandwidth,
) -> Result<Array2<f64>> {
    let n = points.nrows();
    if neighbors.nrows() != n {
        return Err(NidfError::input(format!(
            "neighbor grid has {} rows for {n} points",
            neighbors.nrows()
        )));
    }
    let t = match bandwidth {
        Bandwidth::Fixed(t) if t > 0.0 && t.is_finite() => t,
        Bandwidth::Fixed(t) => {
            return Err(NidfError::input(format!("bandwidth must be positive, got {t}")))
        }
        Bandwidth::Auto => {
            let (sum, count) = neighbors
                .indexed_iter()
                .map(|((i, _), &j)| sq_dist(points.row(i), points.row(j)).sqrt())
                .fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
            let mean = if count > 0 { sum / count as f64 } else { 0.0 };
            // all neighbors coincide: any width gives exp(0) = 1
            if mean > 0.0 {
                mean
            } else {
                1.0
            }
        }
    };
    let denom = 2.0 * t * t;
    let mut s = Array2::<f64>::zeros((n, n));
    for ((i, _), &j) in neighbors.indexed_iter() {
        if i == j {
            continue;
        }
        let w = (-sq_dist(points.row(i), points.row(j)) / denom).exp();
        s[[i, j]] = w;
        s[[j, i]] = w;
    }
    Ok(s)
}

/// Degree vector and combinatorial Laplacian `L = diag(D) − S`.
pub fn laplacian(s: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(NidfError::input(format!("affinity {:?} is not square", s.dim())));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (s[[i, j]] - s[[j, i]]).abs() > 1e-10 {
                return Err(NidfError::input(format!(
                    "affinity is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let degrees = s.sum_axis(ndarray::Axis(1));
    let mut l = -s.clone();
    for i in 0..n {
        l[[i, i]] += degrees[i];
    }
    Ok((degrees, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive distance-table oracle: sort every other index by (distance, index).
    fn knn_oracle(points: &Array2<f64>, k: usize) -> Vec<Vec<usize>> {
        let n = points.nrows();
        (0..n)
            .map(|i| {
                let mut table: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d: f64 = (0..points.ncols())
                            .map(|c| (points[[i, c]] - points[[j, c]]).powi(2))
                            .sum();
                        (d, j)
                    })
                    .collect();
                table.sort_by(|a, b| a.partial_cmp(b).unwrap());
                table.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect()
    }

    #[test]
    fn knn_on_a_line() {
        let p = array![[0.0], [1.0], [10.0]];
        let nb = knn(p.view(), 1).unwrap();
        assert_eq!(nb.column(0).to_vec(), vec![1, 0, 1]);
        let oracle = knn_oracle(&p, 1);
        assert_eq!(oracle, vec![vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn knn_full_rows_are_permutations() {
        let p = array![[0.0, 1.0], [2.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let nb = knn(p.view(), 3).unwrap();
        for (i, row) in nb.rows().into_iter().enumerate() {
            let mut r = row.to_vec();
            r.sort();
            let expect: Vec<usize> = (0..4).filter(|&j| j != i).collect();
            assert_eq!(r, expect);
        }
    }

    #[test]
    fn knn_ties_go_to_lower_index() {
        let p = array![[0.0], [1.0], [1.0], [-1.0]];
        let nb = knn(p.view(), 1).unwrap();
        // point 0 is equidistant from 1, 2 and 3
        assert_eq!(nb[[0, 0]], 1);
        assert_eq!(nb[[1, 0]], 2);
        assert_eq!(nb[[2, 0]], 1);
    }

    #[test]
    fn knn_rejects_k_at_least_n() {
        let p = array![[0.0], [1.0]];
        assert!(knn(p.view(), 2).is_err());
    }

    #[test]
    fn knn_matches_oracle_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = Array2::from_shape_fn((30, 4), |_| rng.random_range(-1.0..1.0));
        let nb = knn(p.view(), 6).unwrap();
        let oracle = knn_oracle(&p, 6);
        for i in 0..30 {
            assert_eq!(nb.row(i).to_vec(), oracle[i]);
        }
    }

    #[test]
    fn heat_kernel_values() {
        // coincident neighbors
        let p = array![[1.0, 2.0], [1.0, 2.0]];
        let nb = knn(p.view(), 1).unwrap();
        let s = heat_affinity(p.view(), &nb, Bandwidth::Fixed(0.7)).unwrap();
        assert_eq!(s[[0, 1]], 1.0);
        assert_eq!(s[[0, 0]], 0.0);

        // distance t·√2 gives exp(−2t²/2t²) = e⁻¹
        let t = 0.8;
        let p = array![[0.0], [t * 2f64.sqrt()]];
        let nb = knn(p.view(), 1).unwrap();
        let s = heat_affinity(p.view(), &nb, Bandwidth::Fixed(t)).unwrap();
        assert!((s[[0, 1]] - 0.367_879_441_171_442_3).abs() < 1e-12);
    }

    #[test]
    fn heat_kernel_sparsity_and_or_rule() {
        let p = array![[0.0], [1.0], [10.0], [11.0]];
        let nb = knn(p.view(), 1).unwrap();
        let s = heat_affinity(p.view(), &nb, Bandwidth::Auto).unwrap();
        assert_eq!(s[[0, 2]], 0.0);
        assert_eq!(s[[1, 3]], 0.0);
        assert!(s[[0, 1]] > 0.0 && s[[2, 3]] > 0.0);

        // 2 lists 1 but 1 does not list 2: edge kept by the OR rule
        let p = array![[0.0], [1.0], [2.5]];
        let nb = knn(p.view(), 1).unwrap();
        assert_eq!(nb[[2, 0]], 1);
        assert_eq!(nb[[1, 0]], 0);
        let s = heat_affinity(p.view(), &nb, Bandwidth::Fixed(1.0)).unwrap();
        assert!(s[[1, 2]] > 0.0);
        assert_eq!(s[[1, 2]], s[[2, 1]]);
    }

    #[test]
    fn heat_kernel_rejects_nonpositive_bandwidth() {
        let p = array![[0.0], [1.0]];
        let nb = knn(p.view(), 1).unwrap();
        assert!(heat_affinity(p.view(), &nb, Bandwidth::Fixed(0.0)).is_err());
        assert!(heat_affinity(p.view(), &nb, Bandwidth::Fixed(-1.0)).is_err());
    }

    #[test]
    fn laplacian_small_cases() {
        let (d, l) = laplacian(&Array2::zeros((3, 3))).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        assert!(l.iter().all(|&v| v == 0.0));

        let (d, l) = laplacian(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(d, array![1.0, 1.0]);
        assert_eq!(l, array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn laplacian_rejects_asymmetric() {
        assert!(laplacian(&array![[0.0, 1.0], [0.5, 0.0]]).is_err());
    }

    fn random_affinity(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(0.4) {
                    let w = rng.random_range(0.0..1.0);
                    s[[i, j]] = w;
                    s[[j, i]] = w;
                }
            }
        }
        s
    }

    proptest! {
        #[test]
        fn laplacian_is_psd_with_constant_null_vector(n in 2usize..20, seed in any::<u64>()) {
            let s = random_affinity(n, seed);
            let (_, l) = laplacian(&s).unwrap();
            let (vals, _) = symmetric_eigen(&l).unwrap();
            prop_assert!(vals[0] >= -1e-8);
            let ones = Array1::<f64>::ones(n);
            let r = l.dot(&ones);
            prop_assert!(r.iter().all(|v| v.abs() < 1e-8));
        }

        #[test]
        fn graph_invariants_hold(n in 3usize..25, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
            let k = 1 + (seed as usize) % (n - 1);
            let g = NeighborGraph::build(p.view(), k, Bandwidth::Auto).unwrap();
            for i in 0..n {
                prop_assert_eq!(g.affinity[[i, i]], 0.0);
                prop_assert!((g.laplacian.row(i).sum()).abs() < 1e-10);
                for j in 0..n {
                    prop_assert_eq!(g.affinity[[i, j]], g.affinity[[j, i]]);
                    prop_assert!((0.0..=1.0).contains(&g.affinity[[i, j]]));
                }
            }
            let x = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
            prop_assert!(x.dot(&g.laplacian.dot(&x)) >= -1e-10 * x.dot(&x));
        }

        #[test]
        fn knn_invariant_under_translation(seed in any::<u64>(), shift in -50i32..50) {
            // eighths keep every coordinate and difference exactly representable
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = Array2::from_shape_fn((15, 2), |_| rng.random_range(-40i32..40) as f64 / 8.0);
            let q = &p + shift as f64;
            prop_assert_eq!(knn(p.view(), 4).unwrap(), knn(q.view(), 4).unwrap());
        }
    }
}
