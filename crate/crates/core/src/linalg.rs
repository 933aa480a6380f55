//! Thin bridge to nalgebra for the dense symmetric eigenproblems.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

use crate::error::{NidfError, Result};

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
/// Column `k` of the returned matrix is the eigenvector of value `k`.
pub(crate) fn symmetric_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(NidfError::input(format!("matrix {:?} is not square", a.dim())));
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = SymmetricEigen::try_new(m, 1e-14, 10_000 * n.max(1)).ok_or_else(|| {
        NidfError::numeric(format!("symmetric eigen-solver did not converge on {n}×{n} matrix"))
    })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(NidfError::numeric("eigen-solver produced non-finite eigenvalues"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = Array2::from_shape_fn((n, n), |(i, c)| eig.eigenvectors[(i, order[c])]);
    Ok((values, vectors))
}

pub(crate) fn quad_form(a: &Array2<f64>, x: &Array1<f64>) -> f64 {
    x.dot(&a.dot(x))
}
