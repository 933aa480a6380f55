//! Fuse four per-view scores with their redundancy matrices and inspect
//! the optimizer state.
//!
//! `cargo run --example fuse_scores`

use nidf::fusion::rank_features;
use nidf::interval::{build_views, IntervalConfig};
use nidf::pipeline::{fuse, redundancy_for_views};
use nidf::selectors::{score_views, SelectorConfig, SelectorKind};
use nidf::synthetic::{gaussian_blobs, BlobSpec};
use nidf::FusionConfig;

fn main() -> nidf::Result<()> {
    let blobs = gaussian_blobs(&BlobSpec { seed: 3, ..Default::default() })?;
    let x = nidf::data::zscore_normalize(&blobs.data);
    let views = build_views(&x, &IntervalConfig::default())?;
    let scores = score_views(&views, SelectorKind::LapScore, &SelectorConfig::default())?;
    let redundancy = redundancy_for_views(&views, 1e-8)?;
    for r in &redundancy {
        println!("{:>5}: smallest eigenvalue before repair {:+.3e}", r.source, r.min_eig_before.unwrap_or(0.0));
    }
    let out = fuse(scores, redundancy, &FusionConfig::default())?;
    let st = &out.state;
    println!("lambda {:.4}, w {:.4?}", st.lambda, st.w);
    println!("{} outer iterations, converged {}", st.iteration, st.converged);
    println!(
        "objective {:.6} -> {:.6}",
        st.objective_history.first().unwrap(),
        st.objective_history.last().unwrap()
    );
    println!("fused top 5 {:?}, informative {:?}", rank_features(out.z.values.view(), 5)?, blobs.informative);
    Ok(())
}
