//! Score every interval view with each selector and compare the top
//! features with the known informative columns.
//!
//! `cargo run --example score_views`

use nidf::fusion::rank_features;
use nidf::interval::{build_views, IntervalConfig};
use nidf::selectors::{score_views, SelectorConfig, SelectorKind};
use nidf::synthetic::{gaussian_blobs, BlobSpec};

fn main() -> nidf::Result<()> {
    let blobs = gaussian_blobs(&BlobSpec { seed: 2, ..Default::default() })?;
    let x = nidf::data::zscore_normalize(&blobs.data);
    let views = build_views(&x, &IntervalConfig::default())?;
    println!("informative columns: {:?}", blobs.informative);
    let params = SelectorConfig { n_embed: Some(3), ..Default::default() };
    for selector in [SelectorKind::LapScore, SelectorKind::Mcfs, SelectorKind::Variance] {
        println!("{selector}");
        for score in score_views(&views, selector, &params)? {
            let top = rank_features(score.values.view(), 5)?;
            println!("  {:>5}: top 5 {top:?}", score.source);
        }
    }
    Ok(())
}
