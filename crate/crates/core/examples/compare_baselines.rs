//! PR-EXTRA against the DRSM baseline on one SPCA instance, merged into a
//! single CSV.
//!
//! `cargo run --release --example compare_baselines -- [out.csv]`

use std::path::PathBuf;

use prextra::compare;
use prextra::runner::{AlgorithmSpec, RunConfig};

fn main() -> prextra::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("compare.csv"), PathBuf::from);
    let base = RunConfig {
        max_iters: 1000,
        eps_cons: 0.0,
        ..RunConfig::spca()
    };
    let drsm = RunConfig {
        algorithm: AlgorithmSpec::Drsm { beta0: 1.0 },
        ..base.clone()
    };
    let result = compare(&[base, drsm], &out)?;
    for r in &result.runs {
        let last = r.records.last().expect("records");
        println!(
            "{:22} kkt={:.3e} consensus={:.3e}",
            r.summary.algorithm,
            last.kkt.unwrap_or(f64::NAN),
            last.consensus.unwrap_or(f64::NAN)
        );
    }
    println!("{}", result.csv_path.display());
    Ok(())
}
