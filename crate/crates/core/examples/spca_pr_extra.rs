//! Default sparse PCA experiment: 8 agents, St(10,5), ℓ1 with λ = 1e-3.
//!
//! `cargo run --release --example spca_pr_extra -- [out_dir]`

use std::path::PathBuf;

use prextra::metrics::rate_slope;
use prextra::runner::{run, RunConfig};

fn main() -> prextra::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let cfg = RunConfig {
        output_dir: out,
        ..RunConfig::spca()
    };
    let output = run(&cfg)?;
    let s = &output.summary;
    println!(
        "{}: {} iterations ({:?}), avg degree {:.2}, gap {:.4}",
        s.algorithm, s.iterations, s.termination, s.realized_average_degree, s.spectral_gap
    );
    for rec in output.records.iter().filter(|r| r.k % 250 == 0 || r.k + 1 == s.iterations) {
        println!(
            "k={:5}  kkt={:.3e}  consensus={:.3e}  objective={:.6e}  |eta|max={:.3e}",
            rec.k,
            rec.kkt.unwrap_or(f64::NAN),
            rec.consensus.unwrap_or(f64::NAN),
            rec.objective.unwrap_or(f64::NAN),
            rec.eta_max
        );
    }
    let a = &s.audit;
    println!(
        "max residual x {:.2e} y {:.2e}; max |eta| {:.3e} <= {:.3e}; wall {:.1} s",
        a.max_x_residual,
        a.max_y_residual,
        a.max_eta,
        a.eta_bound,
        s.total_wall_ms / 1e3
    );
    if let Ok(slope) = rate_slope(&output.records, 100, 3000) {
        println!("rate slope over [100, 3000]: {slope:.3}");
    }
    if let Some(p) = &output.csv_path {
        println!("{}", p.display());
    }
    Ok(())
}
