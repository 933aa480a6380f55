//! Build the four interval views of a small dataset and show how far each
//! view moves away from the original values.
//!
//! `cargo run --example interval_views`

use nidf::interval::{build_views, IntervalConfig};
use nidf::synthetic::{gaussian_blobs, BlobSpec};

fn main() -> nidf::Result<()> {
    let blobs = gaussian_blobs(&BlobSpec { n_samples: 120, n_noise: 20, seed: 1, ..Default::default() })?;
    let x = nidf::data::zscore_normalize(&blobs.data);
    let cfg = IntervalConfig { k: 10, ..Default::default() };
    let views = build_views(&x, &cfg)?;
    println!("{} samples x {} features, k = {}, alpha = {}", x.n_samples(), x.n_features(), cfg.k, cfg.alpha);
    for (kind, view) in views.iter() {
        let diff = view.values() - x.values();
        let mean_abs = diff.mapv(f64::abs).mean().unwrap_or(0.0);
        println!("{:>5}: mean |view - X| = {mean_abs:.4}", kind.tag());
    }
    Ok(())
}
