mod common;

use common::*;
use nalgebra::DMatrix;
use prextra::regularizer::{RegularizerKind, RegularizerSpec};
use prextra::stiefel::StiefelPoint;
use prextra::tangent_prox::{solve_subproblem, subproblem_objective, SubproblemSolver};
use proptest::prelude::*;

#[test]
fn newton_matches_subgradient_oracle() {
    let reg = RegularizerSpec::l1(0.1).unwrap();
    let mut g = rng(31);
    for _ in 0..10 {
        let y = random_point(4, 2, &mut g);
        let sol = solve_subproblem(&StiefelPoint::new(y.clone()).unwrap(), &reg, 0.05, 1e-12).unwrap();
        let oracle = subgradient_subproblem_l1(&y, 0.1, 0.05, 100_000);
        assert!((sol.eta.as_matrix() - oracle).norm() < 1e-6);
    }
}

#[test]
fn newton_matches_oracle_with_zero_entries() {
    // Large threshold relative to the entries: y + η has exact zeros.
    let reg = RegularizerSpec::l1(1.0).unwrap();
    let mut g = rng(32);
    for _ in 0..5 {
        let y = random_point(4, 2, &mut g);
        let yp = StiefelPoint::new(y.clone()).unwrap();
        let sol = solve_subproblem(&yp, &reg, 0.2, 1e-12).unwrap();
        let oracle = subgradient_subproblem_l1(&y, 1.0, 0.2, 100_000);
        let ours = subproblem_objective(&yp, &reg, 0.2, sol.eta.as_matrix());
        let theirs = subproblem_objective(&yp, &reg, 0.2, &oracle);
        assert!(ours <= theirs + 1e-6, "{ours} vs {theirs}");
        assert!((sol.eta.as_matrix() - oracle).norm() < 1e-3);
    }
}

#[test]
fn solution_is_unique_across_initial_multipliers() {
    let reg = RegularizerSpec::l21(0.3).unwrap();
    let mut g = rng(33);
    let y = StiefelPoint::new(random_point(6, 3, &mut g)).unwrap();
    let solver = SubproblemSolver {
        tol: 1e-12,
        ..Default::default()
    };
    let a = solver.solve(&y, &reg, 0.1, None).unwrap();
    let start = gaussian(3, 3, &mut g);
    let start = (&start + start.transpose()) * 0.5;
    let b = solver.solve(&y, &reg, 0.1, Some(&start)).unwrap();
    assert!((a.eta.as_matrix() - b.eta.as_matrix()).norm() < 1e-8);
}

#[test]
fn step_shrinks_with_tau() {
    let reg = RegularizerSpec::l1(0.5).unwrap();
    let mut g = rng(34);
    let y = StiefelPoint::new(random_point(5, 2, &mut g)).unwrap();
    let lr = reg.lipschitz_constant(5, 2);
    let mut last = f64::INFINITY;
    for tau in [1e-1, 1e-2, 1e-3, 1e-4] {
        let n = solve_subproblem(&y, &reg, tau, 1e-12).unwrap().eta.norm();
        assert!(n <= 2.0 * tau * lr + 1e-9);
        assert!(n <= last);
        last = n;
    }
}

fn instance() -> impl Strategy<Value = (DMatrix<f64>, RegularizerSpec, f64)> {
    (
        any::<u64>(),
        prop_oneof![Just(RegularizerKind::L1), Just(RegularizerKind::L21)],
        0.01f64..1.0,
        1e-3f64..0.5,
    )
        .prop_map(|(seed, kind, lambda, tau)| {
            let mut g = rng(seed);
            (random_point(5, 3, &mut g), RegularizerSpec::new(kind, lambda).unwrap(), tau)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn solutions_are_tangent_bounded_and_descend((y, reg, tau) in instance()) {
        let yp = StiefelPoint::new(y.clone()).unwrap();
        let sol = solve_subproblem(&yp, &reg, tau, 1e-10).unwrap();
        let eta = sol.eta.as_matrix();
        let s = y.transpose() * eta;
        prop_assert!((&s + s.transpose()).norm() < 1e-9);
        prop_assert!(eta.norm() <= 2.0 * tau * reg.lipschitz_constant(5, 3) + 1e-9);
        let g0 = subproblem_objective(&yp, &reg, tau, &DMatrix::zeros(5, 3));
        let g1 = subproblem_objective(&yp, &reg, tau, eta);
        prop_assert!(g0 - g1 >= eta.norm_squared() / (2.0 * tau) - 1e-9);
    }
}
