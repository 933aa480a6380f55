//! Run the whole pipeline on a CSV file, or on a generated dataset when no
//! path is given, and write the artifacts to a directory.
//!
//! `cargo run --example full_pipeline -- [data.csv [out_dir]]`
//!
//! A CSV must have a header row and a `label` column.

use std::path::PathBuf;

use nidf::pipeline::{cmd_pipeline, RunConfig};
use nidf::synthetic::{gaussian_blobs, BlobSpec};

fn main() -> nidf::Result<()> {
    let mut args = std::env::args().skip(1);
    let out_dir = std::env::temp_dir().join("nidf-example");
    let dataset = match args.next() {
        Some(p) => PathBuf::from(p),
        None => {
            std::fs::create_dir_all(&out_dir).ok();
            let p = out_dir.join("blobs.csv");
            nidf::data::write_csv(&gaussian_blobs(&BlobSpec::default())?.data, &p)?;
            p
        }
    };
    let cfg = RunConfig {
        label_col: Some("label".parse()?),
        out_dir: args.next().map(PathBuf::from).unwrap_or(out_dir),
        timing: true,
        ..Default::default()
    };
    let art = cmd_pipeline(&dataset, &cfg)?;
    println!("fused scores: {}", art.z_csv.display());
    println!("fusion state: {}", art.sidecar.display());
    if let (Some(path), Some(r)) = (&art.report, &art.result.report) {
        println!("report: {}", path.display());
        println!("ACC {:.4}  NMI {:.4}  in {} ms", r.acc_avg, r.nmi_avg, r.runtime_ms);
    }
    println!("top 10 features: {:?}", &art.result.ranking[..10.min(art.result.ranking.len())]);
    Ok(())
}
