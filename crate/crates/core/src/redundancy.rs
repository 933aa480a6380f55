//! Pairwise feature-redundancy matrices.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::Result;
use crate::linalg::symmetric_eigen;
use crate::selectors::ScoreSource;

/// Symmetric `d × d` redundancy matrix for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyMatrix {
    pub values: Array2<f64>,
    pub source: ScoreSource,
    pub psd_repaired: bool,
    /// Smallest eigenvalue seen by [`psd_repair`]; `None` before repair.
    pub min_eig_before: Option<f64>,
}

/// Builds a redundancy matrix from one view's values.
pub trait RedundancyBuilder {
    fn build(&self, x: ArrayView2<f64>, source: ScoreSource) -> RedundancyMatrix;
}

/// Absolute Pearson correlation, the shipped [`RedundancyBuilder`].
#[derive(Debug, Clone, Copy, Default)]
pub struct AbsCorrelation;

impl RedundancyBuilder for AbsCorrelation {
    fn build(&self, x: ArrayView2<f64>, source: ScoreSource) -> RedundancyMatrix {
        abs_correlation(x, source)
    }
}

const CONSTANT_TOL: f64 = 1e-12;

/// `A_pq = |pearson(f_p, f_q)|` with unit diagonal. A constant column is
/// uncorrelated with everything else.
pub fn abs_correlation(x: ArrayView2<f64>, source: ScoreSource) -> RedundancyMatrix {
    let (n, d) = x.dim();
    let mut centered = x.to_owned();
    let mut norms = Array1::<f64>::zeros(d);
    for (j, mut col) in centered.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        let sd = (col.dot(&col) / n as f64).sqrt();
        norms[j] = if sd < CONSTANT_TOL { 0.0 } else { col.dot(&col).sqrt() };
    }
    let gram = centered.t().dot(&centered);
    let mut a = Array2::<f64>::zeros((d, d));
    for p in 0..d {
        a[[p, p]] = 1.0;
        for q in (p + 1)..d {
            let v = if norms[p] == 0.0 || norms[q] == 0.0 {
                0.0
            } else {
                (gram[[p, q]] / (norms[p] * norms[q])).abs().min(1.0)
            };
            a[[p, q]] = v;
            a[[q, p]] = v;
        }
    }
    RedundancyMatrix {
        values: a,
        source,
        psd_repaired: false,
        min_eig_before: None,
    }
}

pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Clip negative eigenvalues to zero and add `eps·I`.
pub fn psd_repair(a: &RedundancyMatrix, eps: f64) -> Result<RedundancyMatrix> {
    let (vals, vecs) = symmetric_eigen(&a.values)?;
    let min_eig = vals.first().copied().unwrap_or(0.0);
    let clipped = vals.mapv(|v| v.max(0.0));
    let scaled = &vecs * &clipped;
    let mut out = scaled.dot(&vecs.t());
    let d = out.nrows();
    for p in 0..d {
        for q in (p + 1)..d {
            let m = 0.5 * (out[[p, q]] + out[[q, p]]);
            out[[p, q]] = m;
            out[[q, p]] = m;
        }
        out[[p, p]] += eps;
    }
    Ok(RedundancyMatrix {
        values: out,
        source: a.source,
        psd_repaired: true,
        min_eig_before: Some(min_eig),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rm(values: Array2<f64>) -> RedundancyMatrix {
        RedundancyMatrix {
            values,
            source: ScoreSource::Original,
            psd_repaired: false,
            min_eig_before: None,
        }
    }

    #[test]
    fn duplicated_and_negated_columns_are_fully_redundant() {
        let x = array![[1.0, 1.0, -3.0, 7.0], [2.0, 2.0, -6.0, 1.0], [4.0, 4.0, -12.0, 3.0]];
        let a = abs_correlation(x.view(), ScoreSource::Original);
        assert!((a.values[[0, 1]] - 1.0).abs() < 1e-12);
        assert!((a.values[[0, 2]] - 1.0).abs() < 1e-12);
        assert_eq!(a.values[[3, 3]], 1.0);
    }

    #[test]
    fn constant_column_is_unrelated() {
        let x = array![[5.0, 1.0], [5.0, 2.0], [5.0, 0.0]];
        let a = abs_correlation(x.view(), ScoreSource::Original);
        assert_eq!(a.values[[0, 1]], 0.0);
        assert_eq!(a.values[[0, 0]], 1.0);
    }

    #[test]
    fn repair_of_psd_matrix_only_adds_ridge() {
        let a = rm(array![[1.0, 0.3], [0.3, 1.0]]);
        let r = psd_repair(&a, 1e-8).unwrap();
        let expect = &a.values + &(Array2::<f64>::eye(2) * 1e-8);
        for (x, y) in r.values.iter().zip(expect.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
        let rank_one = rm(array![[1.0, 1.0], [1.0, 1.0]]);
        let r = psd_repair(&rank_one, 1e-8).unwrap();
        assert!((r.values[[0, 1]] - 1.0).abs() < 1e-9);
        assert!((r.values[[0, 0]] - 1.0 - 1e-8).abs() < 1e-9);
    }

    #[test]
    fn repair_lifts_negative_eigenvalue_to_ridge() {
        // [[1,a,0],[a,1,a],[0,a,1]] has eigenvalues 1 and 1 ± √2·a; a = 1.05/√2 puts
        // the smallest at exactly −0.05
        let a_off = 1.05 / 2f64.sqrt();
        let a = rm(array![[1.0, a_off, 0.0], [a_off, 1.0, a_off], [0.0, a_off, 1.0]]);
        let (before, _) = symmetric_eigen(&a.values).unwrap();
        assert!((before[0] + 0.05).abs() < 1e-12, "{before:?}");
        let eps = 1e-8;
        let r = psd_repair(&a, eps).unwrap();
        assert!((r.min_eig_before.unwrap() - before[0]).abs() < 1e-12);
        let (after, _) = symmetric_eigen(&r.values).unwrap();
        assert!(after[0] >= eps - 1e-10 && after[0] <= eps + 1e-10, "{after:?}");
    }

    fn spectral_norm(m: &Array2<f64>) -> f64 {
        let (v, _) = symmetric_eigen(m).unwrap();
        v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    proptest! {
        #[test]
        fn correlation_invariant_under_affine_columns(seed in any::<u64>(), scale in prop_oneof![-9.0f64..-0.1, 0.1f64..9.0], shift in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((12, 4), |_| rng.random_range(-1.0..1.0));
            let mut y = x.clone();
            y.column_mut(2).mapv_inplace(|v| scale * v + shift);
            let a = abs_correlation(x.view(), ScoreSource::Original);
            let b = abs_correlation(y.view(), ScoreSource::Original);
            for (p, q) in a.values.iter().zip(b.values.iter()) {
                prop_assert!((p - q).abs() < 1e-10);
                prop_assert!((0.0..=1.0).contains(p));
            }
        }

        #[test]
        fn repair_is_psd_and_close(seed in any::<u64>(), d in 2usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // few samples relative to d plus sign flips make |corr| indefinite
            let x = Array2::from_shape_fn((4, d), |_| rng.random_range(-1.0..1.0));
            let a = abs_correlation(x.view(), ScoreSource::Original);
            let r = psd_repair(&a, DEFAULT_RIDGE).unwrap();
            let (vals, _) = symmetric_eigen(&r.values).unwrap();
            prop_assert!(vals[0] >= -1e-8);
            let min_before = r.min_eig_before.unwrap();
            let diff = &r.values - &a.values;
            prop_assert!(spectral_norm(&diff) <= min_before.min(0.0).abs() + DEFAULT_RIDGE + 1e-9);
            for _ in 0..5 {
                let raw = Array1::from_shape_fn(d, |_| rng.random_range(0.0..1.0));
                let z = &raw / raw.sum_axis(Axis(0))[()];
                prop_assert!(z.dot(&r.values.dot(&z)) >= 0.0);
            }
        }
    }
}
