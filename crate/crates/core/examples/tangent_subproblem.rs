//! Solves `min_{η ∈ T_y} ‖η‖²/(2τ) + r(y + η)` by semismooth Newton and
//! reports the step bound `‖η‖ ≤ 2τL_r`.

use prextra::algorithms::random_stiefel_point;
use prextra::tangent_prox::{solve_subproblem, subproblem_objective};
use prextra::RegularizerSpec;

fn main() -> prextra::Result<()> {
    let (lambda, tau) = (0.1, 0.05);
    let reg = RegularizerSpec::l1(lambda)?;
    for seed in 0..5 {
        let y = random_stiefel_point(6, 3, seed)?;
        let sol = solve_subproblem(&y, &reg, tau, 1e-12)?;
        println!(
            "seed {seed}: ‖η‖ = {:.4e} (bound {:.4e}), objective {:.6}, {} inner iterations, {:?}",
            sol.eta.norm(),
            2.0 * tau * reg.lipschitz_constant(6, 3),
            subproblem_objective(&y, &reg, tau, sol.eta.as_matrix()),
            sol.inner_iterations,
            sol.method_used
        );
    }
    Ok(())
}
