//! Effect of the stepsize on the default SPCA experiment.

use prextra::metrics::rate_slope;
use prextra::runner::{run, AlgorithmSpec, RunConfig};

fn main() -> prextra::Result<()> {
    for step in [1e-3, 1e-2, 1e-1] {
        let out = run(&RunConfig {
            algorithm: AlgorithmSpec::PrExtra { alpha: step, tau: step },
            eps_cons: 0.0,
            ..RunConfig::spca()
        })?;
        let kkt = |k: usize| out.records[k].kkt.unwrap_or(f64::NAN);
        let slope = rate_slope(&out.records, 100, 3000).unwrap_or(f64::NAN);
        println!(
            "alpha = tau = {step:.0e}: kkt {:.3e} -> {:.3e} (k=1500) -> {:.3e}, slope {slope:.3}",
            kkt(0),
            kkt(1500),
            kkt(2999)
        );
    }
    Ok(())
}
