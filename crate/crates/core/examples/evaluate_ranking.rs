//! Cluster on the top-m features of a ranking and report ACC and NMI for
//! each m.
//!
//! `cargo run --example evaluate_ranking`

use ndarray::Array1;
use nidf::eval::{evaluate_selection, KMeansConfig};
use nidf::synthetic::{gaussian_blobs, BlobSpec};

fn main() -> nidf::Result<()> {
    let blobs = gaussian_blobs(&BlobSpec { seed: 4, ..Default::default() })?;
    let x = nidf::data::zscore_normalize(&blobs.data);
    // an oracle ranking: informative columns first
    let mut oracle = Array1::zeros(x.n_features());
    for &j in &blobs.informative {
        oracle[j] = 1.0;
    }
    let kcfg = KMeansConfig { n_clusters: 3, restarts: 10, ..Default::default() };
    let report = evaluate_selection(&x, oracle.view(), &[5, 10, 25, 50], &kcfg)?;
    println!("    m    ACC (std)        NMI (std)");
    for r in &report.per_m {
        println!("{:>5}  {:.4} ({:.4})  {:.4} ({:.4})", r.m, r.acc_mean, r.acc_std, r.nmi_mean, r.nmi_std);
    }
    println!("average ACC {:.4}, NMI {:.4}", report.acc_avg, report.nmi_avg);
    Ok(())
}
