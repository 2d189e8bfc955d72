//! Runs the pre-flight checks for a config (default: SPCA).
//!
//! `cargo run --release --example validate_suite -- [config.json]`

use prextra::runner::RunConfig;
use prextra::validate::validate;

fn main() -> prextra::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::spca(),
    };
    let report = validate(&cfg);
    print!("{report}");
    std::process::exit(if report.passed() { 0 } else { 1 });
}
