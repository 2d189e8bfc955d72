mod common;

use common::*;
use nalgebra::{dmatrix, DMatrix};
use prextra::metrics::{
    consensus_error, consensus_potential, eps_stationarity, kkt_violation, manifold_mean, riemannian_gradient_norm,
};
use prextra::network::{generate_er_graph, metropolis_weights};
use prextra::problems::{ProblemInstance, ProblemKind};
use prextra::regularizer::RegularizerSpec;
use prextra::stiefel::StiefelPoint;

fn small_instance(lambda: f64, seed: u64) -> ProblemInstance {
    let mut g = rng(seed);
    let blocks: Vec<DMatrix<f64>> = (0..2).map(|_| gaussian(5, 3, &mut g)).collect();
    ProblemInstance::from_blocks(ProblemKind::Spca, &blocks, 2, RegularizerSpec::l1(lambda).unwrap()).unwrap()
}

/// A point of St(3,2) with three exact zeros.
fn sparse_point() -> StiefelPoint {
    let (c, s) = (0.6, 0.8);
    StiefelPoint::new(dmatrix![1.0, 0.0; 0.0, c; 0.0, s]).unwrap()
}

/// `min ‖P_T(∇f + fixed + g)‖` over `g` with free entries on a 21-point grid.
fn grid_kkt(inst: &ProblemInstance, x: &StiefelPoint, lambda: f64) -> f64 {
    let xm = x.as_matrix();
    let grad = inst.global_gradient(xm);
    let fixed = sign_subgradient(xm, lambda);
    let free: Vec<usize> = (0..xm.len()).filter(|&k| xm[k] == 0.0).collect();
    let grid: Vec<f64> = (0..21).map(|t| -lambda + 2.0 * lambda * t as f64 / 20.0).collect();
    let mut best = f64::INFINITY;
    let total = 21usize.pow(free.len() as u32);
    for code in 0..total {
        let mut g = fixed.clone();
        let mut c = code;
        for &k in &free {
            g[k] = grid[c % 21];
            c /= 21;
        }
        best = best.min(tangent_part(xm, &(&grad + g)).norm());
    }
    best
}

/// Same minimization by a long projected-gradient run with a small fixed step.
fn long_run_kkt(inst: &ProblemInstance, x: &StiefelPoint, lambda: f64) -> f64 {
    let xm = x.as_matrix();
    let grad = inst.global_gradient(xm);
    let free: Vec<usize> = (0..xm.len()).filter(|&k| xm[k] == 0.0).collect();
    let mut g = sign_subgradient(xm, lambda);
    for _ in 0..200_000 {
        let res = tangent_part(xm, &(&grad + &g));
        for &k in &free {
            g[k] = (g[k] - 0.5 * res[k]).clamp(-lambda, lambda);
        }
    }
    tangent_part(xm, &(&grad + g)).norm()
}

#[test]
fn kkt_matches_grid_and_long_run_oracles() {
    for (seed, lambda) in [(71, 0.1), (72, 0.5), (73, 2.0)] {
        let inst = small_instance(lambda, seed);
        let x = sparse_point();
        let ours = kkt_violation(&inst, &x, 1e-10);
        assert!(ours.converged);
        let grid = grid_kkt(&inst, &x, lambda);
        let long = long_run_kkt(&inst, &x, lambda);
        assert!((ours.value - grid).abs() < 2e-2, "{} vs grid {}", ours.value, grid);
        assert!((ours.value - long).abs() < 1e-6, "{} vs long run {}", ours.value, long);
        assert!(ours.value <= grid + 1e-12);
    }
}

#[test]
fn kkt_without_regularizer_is_the_gradient_norm() {
    let inst = small_instance(0.0, 74).with_regularizer(RegularizerSpec::zero());
    let mut g = rng(74);
    let x = StiefelPoint::new(random_point(3, 2, &mut g)).unwrap();
    assert_eq!(kkt_violation(&inst, &x, 1e-10).value, riemannian_gradient_norm(&inst, &x));
}

#[test]
fn kkt_vanishes_on_top_invariant_subspace() {
    let inst = small_instance(0.0, 75).with_regularizer(RegularizerSpec::zero());
    let m = inst.mean_hessian();
    let e = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let x = DMatrix::from_fn(3, 2, |row, col| e.eigenvectors[(row, order[col])]);
    let x = StiefelPoint::new(x).unwrap();
    assert!(kkt_violation(&inst, &x, 1e-10).value < 1e-8);
    let xs = vec![x.clone(); 4];
    let eps = eps_stationarity(&inst, &xs, 1e-8, 1e-10).unwrap();
    assert!(eps.stationary, "{eps:?}");
}

#[test]
fn consensus_and_potential_vanish_together() {
    let mixing = metropolis_weights(&generate_er_graph(6, 0.6, 76).unwrap().graph);
    let mut g = rng(76);
    let x = StiefelPoint::new(random_point(5, 2, &mut g)).unwrap();
    let same = vec![x.clone(); 6];
    assert!(consensus_error(&same).unwrap() < 1e-28);
    assert_eq!(consensus_potential(&same, &mixing), 0.0);
    let spread: Vec<StiefelPoint> = (0..6).map(|_| StiefelPoint::new(random_point(5, 2, &mut g)).unwrap()).collect();
    assert!(consensus_error(&spread).unwrap() > 1e-3);
    assert!(consensus_potential(&spread, &mixing) > 1e-3);
}

#[test]
fn potential_matches_quadratic_form() {
    let mixing = metropolis_weights(&generate_er_graph(5, 0.6, 77).unwrap().graph);
    let mut g = rng(77);
    let xs: Vec<DMatrix<f64>> = (0..5).map(|_| gaussian(4, 2, &mut g)).collect();
    // ½⟨x, (I − W)x⟩ with the Kronecker-stacked x.
    let lap = DMatrix::identity(5, 5) - mixing.w();
    let mut form = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            form += lap[(i, j)] * xs[i].dot(&xs[j]);
        }
    }
    assert!((consensus_potential(&xs, &mixing) - 0.5 * form).abs() < 1e-12);
}

#[test]
fn mean_of_antipodal_pair_is_an_error() {
    let x = sparse_point();
    let neg = StiefelPoint::new(-x.as_matrix()).unwrap();
    assert!(manifold_mean(&[x, neg]).is_err());
}
