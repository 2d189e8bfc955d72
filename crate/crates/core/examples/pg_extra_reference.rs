//! Euclidean proximal EXTRA on a random ℓ1-regularized quadratic, in both
//! the coupled and the decoupled form.

use nalgebra::DMatrix;
use prextra::algorithms::{
    pg_extra_coupled_init, pg_extra_coupled_step, pg_extra_decoupled_init, pg_extra_decoupled_step,
};
use prextra::network::{generate_er_graph, metropolis_weights};
use prextra::problems::ProblemInstance;
use prextra::RegularizerSpec;

fn main() -> prextra::Result<()> {
    let inst = ProblemInstance::random_quadratic(4, 6, 3, RegularizerSpec::l1(0.1)?, 3)?;
    let w = metropolis_weights(&generate_er_graph(4, 0.6, 3)?.graph);
    let x0 = vec![DMatrix::zeros(6, 3); 4];
    let alpha = 0.1;
    let mut coupled = pg_extra_coupled_init(&x0, &w, &inst, alpha);
    // The decoupled form runs one step ahead of the coupled one.
    let mut decoupled = pg_extra_decoupled_step(&pg_extra_decoupled_init(&x0, &w, &inst, alpha), &w, &inst, alpha);
    for k in 0..=400 {
        if k % 100 == 0 {
            let gap = (0..4).map(|i| (&coupled.x[i] - &decoupled.x[i]).amax()).fold(0.0, f64::max);
            let spread = (0..4).map(|i| (&coupled.x[i] - &coupled.x[0]).norm()).fold(0.0, f64::max);
            println!("k={k:3}  form gap {gap:.2e}  node spread {spread:.2e}");
        }
        coupled = pg_extra_coupled_step(&coupled, &w, &inst, alpha);
        decoupled = pg_extra_decoupled_step(&decoupled, &w, &inst, alpha);
    }
    Ok(())
}
