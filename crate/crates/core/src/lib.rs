//! Unsupervised feature selection by neighborhood-interval perturbation fusion.
//!
//! A dataset is expanded into four perturbed copies (sample-level and
//! feature-level k-NN intervals, lower and upper bounds). A classic
//! unsupervised selector scores the features on each copy, a redundancy
//! matrix is built per copy, and an alternating optimizer fuses everything
//! into one score vector `z` on the probability simplex:
//!
//! ```text
//! min_{λ, z, w}  λ² Σ_i w_i² zᵀA_i z − λ Σ_i w_i zᵀs_i
//! s.t. z ≥ 0, Σz = 1, w ≥ 0, Σw = 1
//! ```
//!
//! The [`eval`] module scores a ranking by clustering the top-`m` features
//! with k-means and reporting ACC and NMI against known labels.
//!
//! Each major capability has a runnable program under `examples/`:
//!
//! ```bash
//! cargo run -p nidf --example interval_views
//! cargo run -p nidf --example score_views
//! cargo run -p nidf --example simplex_qp
//! cargo run -p nidf --example fuse_scores
//! cargo run -p nidf --example evaluate_ranking
//! cargo run -p nidf --example full_pipeline
//! cargo run -p nidf --example bench_table
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod interval;
pub(crate) mod linalg;
pub mod neighborhood;
pub mod pipeline;
pub mod redundancy;
pub mod selectors;
pub mod synthetic;

pub use data::{DataMatrix, LabelColumn, Normalization};
pub use error::{NidfError, Result};
pub use eval::{EvalReport, KMeansConfig};
pub use fusion::{run_nidf, FusionConfig, FusionState};
pub use interval::{build_views, IntervalConfig, IntervalViews, ScaleRule, ViewKind};
pub use neighborhood::NeighborGraph;
pub use pipeline::RunConfig;
pub use redundancy::RedundancyMatrix;
pub use selectors::{FeatureScore, SelectorConfig, SelectorKind};
