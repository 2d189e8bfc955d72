//! Coordinate-independent sparse estimation: ℓ2,1 with λ = 1e-2.
//!
//! `cargo run --release --example cise_pr_extra -- [out_dir]`

use std::path::PathBuf;

use prextra::runner::{run, RunConfig};

fn main() -> prextra::Result<()> {
    let cfg = RunConfig {
        output_dir: std::env::args().nth(1).map(PathBuf::from),
        eps_cons: 0.0,
        ..RunConfig::cise()
    };
    let output = run(&cfg)?;
    for rec in output.records.iter().filter(|r| r.k % 500 == 0) {
        println!(
            "k={:5}  kkt={:.3e}  consensus={:.3e}",
            rec.k,
            rec.kkt.unwrap_or(f64::NAN),
            rec.consensus.unwrap_or(f64::NAN)
        );
    }
    println!("{:?} after {} iterations", output.summary.termination, output.summary.iterations);
    Ok(())
}
