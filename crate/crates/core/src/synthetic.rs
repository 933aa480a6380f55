//! Labeled synthetic datasets with a known set of informative features.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::DataMatrix;
use crate::error::Result;

/// Gaussian clusters that differ only in a few feature columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub n_samples: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    pub n_clusters: usize,
    /// Cluster centers are drawn uniformly from `[−separation, separation]`
    /// in every informative column; all noise is unit-variance.
    pub separation: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            n_samples: 300,
            n_informative: 5,
            n_noise: 45,
            n_clusters: 3,
            separation: 3.0,
            seed: 0,
        }
    }
}

/// A dataset plus the column indices that carry the cluster structure.
#[derive(Debug, Clone)]
pub struct Blobs {
    pub data: DataMatrix,
    pub informative: Vec<usize>,
}

/// Sample `spec`. Informative columns are scattered at random positions and
/// samples are assigned to clusters round-robin.
pub fn gaussian_blobs(spec: &BlobSpec) -> Result<Blobs> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.n_informative + spec.n_noise;
    let mut columns: Vec<usize> = (0..d).collect();
    columns.shuffle(&mut rng);
    let mut informative: Vec<usize> = columns[..spec.n_informative].to_vec();
    informative.sort_unstable();

    let centers = Array2::from_shape_fn((spec.n_clusters, spec.n_informative), |_| {
        rng.random_range(-spec.separation..=spec.separation)
    });
    let labels: Vec<usize> = (0..spec.n_samples).map(|i| i % spec.n_clusters).collect();
    let mut values = Array2::<f64>::zeros((spec.n_samples, d));
    for (i, &c) in labels.iter().enumerate() {
        for j in 0..d {
            values[[i, j]] = rng.sample::<f64, _>(StandardNormal);
        }
        for (slot, &j) in informative.iter().enumerate() {
            values[[i, j]] += centers[[c, slot]];
        }
    }
    let ids = (0..d).map(|j| format!("f{j}")).collect();
    Ok(Blobs {
        data: DataMatrix::with_metadata(values, Some(labels), Some(ids))?,
        informative,
    })
}
