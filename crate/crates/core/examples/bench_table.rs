//! Compare each selector with and without interval fusion over several
//! datasets and print the table with its AVERAGE row.
//!
//! `cargo run --release --example bench_table`

use nidf::pipeline::{run_bench, RunConfig};
use nidf::synthetic::{gaussian_blobs, BlobSpec};
use nidf::SelectorKind;

fn main() -> nidf::Result<()> {
    let datasets = [(3, 2.0), (4, 3.0), (5, 2.5)]
        .iter()
        .enumerate()
        .map(|(i, &(clusters, separation))| {
            let spec = BlobSpec { n_clusters: clusters, separation, seed: i as u64, ..Default::default() };
            Ok((format!("blobs{i}"), gaussian_blobs(&spec)?.data))
        })
        .collect::<nidf::Result<Vec<_>>>()?;
    let cfg = RunConfig { restarts: 10, ..Default::default() };
    let table = run_bench(&datasets, &[SelectorKind::LapScore, SelectorKind::Mcfs], &cfg)?;
    print!("{}", table.to_csv());
    Ok(())
}
