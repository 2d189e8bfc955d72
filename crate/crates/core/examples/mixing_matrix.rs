//! Connected Erdős–Rényi graph with Metropolis–Hastings weights, audited
//! and written in the plain-text weight format.

use prextra::network::{check_mixing, generate_er_graph, metropolis_weights};

fn main() -> prextra::Result<()> {
    let sample = generate_er_graph(8, 0.6, 1)?;
    let w = metropolis_weights(&sample.graph);
    println!(
        "seed used {}, {} rejected draws, average degree {:.2}",
        sample.seed_used,
        sample.rejected,
        sample.graph.average_degree()
    );
    let check = check_mixing(&w, Some(&sample.graph));
    println!("{check:#?}");
    println!("passes at 1e-14: {}", check.passes(1e-14));
    print!("{}", w.to_text());
    Ok(())
}
