mod common;

use common::*;
use nalgebra::DMatrix;
use prextra::problems::{
    partition, read_csv_matrix, read_matrix, synthesize, write_matrix, ExponentKind, ProblemInstance, ProblemKind,
    SpectralRecipe,
};
use prextra::regularizer::RegularizerSpec;
use prextra::Error;

fn recipe(kind: ExponentKind, seed: u64) -> SpectralRecipe {
    SpectralRecipe {
        m: 400,
        d: 10,
        xi: 0.8,
        exponent_kind: kind,
        seed,
    }
}

fn instance(seed: u64) -> ProblemInstance {
    ProblemInstance::synthetic(ProblemKind::Spca, &recipe(ExponentKind::Geometric, seed), 4, 5, 0.001).unwrap()
}

#[test]
fn singular_values_follow_the_recipe() {
    for kind in [ExponentKind::Geometric, ExponentKind::HalfGeometric] {
        let r = recipe(kind, 51);
        let a = synthesize(&r).unwrap();
        let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        for (got, want) in sv.iter().zip(r.singular_values()) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }
    let half = recipe(ExponentKind::HalfGeometric, 0).singular_values();
    assert!((half[1] - 0.8f64.sqrt()).abs() < 1e-15);
    let geo = recipe(ExponentKind::Geometric, 0).singular_values();
    assert!((geo[9] - 0.134217728).abs() < 1e-12);
}

#[test]
fn synthesis_is_deterministic() {
    let r = recipe(ExponentKind::Geometric, 52);
    assert_eq!(synthesize(&r).unwrap(), synthesize(&r).unwrap());
}

#[test]
fn partition_is_contiguous_and_preserves_the_gram() {
    let a = synthesize(&recipe(ExponentKind::Geometric, 53)).unwrap();
    let blocks = partition(&a, 8).unwrap();
    assert_eq!(blocks.len(), 8);
    assert!(blocks.iter().all(|b| b.shape() == (50, 10)));
    assert_eq!(blocks[2], a.rows(100, 50).clone_owned());
    let gram = blocks.iter().fold(DMatrix::zeros(10, 10), |acc, b| acc + b.transpose() * b);
    assert!((gram - a.transpose() * &a).amax() < 1e-10);
    assert_eq!(partition(&a, 1).unwrap()[0], a);
    assert!(matches!(partition(&a, 7), Err(Error::IndivisibleRows { rows: 400, nodes: 7 })));
}

#[test]
fn gradients_match_finite_differences() {
    let inst = instance(54);
    let mut g = rng(54);
    let x = gaussian(10, 5, &mut g);
    let h = 1e-6;
    for i in 0..inst.node_count() {
        let grad = inst.local_euclidean_gradient(i, &x);
        let mut fd = DMatrix::zeros(10, 5);
        for idx in 0..50 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[idx] += h;
            xm[idx] -= h;
            fd[idx] = (inst.local_objective(i, &xp) - inst.local_objective(i, &xm)) / (2.0 * h);
        }
        assert!((grad - fd).amax() < 1e-5);
    }
}

#[test]
fn objective_at_top_singular_vectors() {
    let r = recipe(ExponentKind::Geometric, 55);
    let a = synthesize(&r).unwrap();
    let inst = instance(55);
    let svd = a.clone().svd(false, true);
    let mut order: Vec<usize> = (0..10).collect();
    order.sort_by(|&p, &q| svd.singular_values[q].total_cmp(&svd.singular_values[p]));
    let vt = svd.v_t.unwrap();
    let x = DMatrix::from_fn(10, 5, |row, col| vt[(order[col], row)]);
    let expected = -0.5 * order[..5].iter().map(|&j| svd.singular_values[j].powi(2)).sum::<f64>() / 4.0;
    assert!((inst.global_smooth_objective(&x) - expected).abs() < 1e-12);
}

#[test]
fn trivial_values() {
    let inst = instance(56);
    let zero = DMatrix::zeros(10, 5);
    assert_eq!(inst.global_smooth_objective(&zero), 0.0);
    assert_eq!(inst.local_euclidean_gradient(0, &zero), zero);
    let blocks = vec![DMatrix::zeros(3, 4); 2];
    let empty = ProblemInstance::from_blocks(ProblemKind::Spca, &blocks, 2, RegularizerSpec::zero()).unwrap();
    let mut g = rng(56);
    let x = gaussian(4, 2, &mut g);
    assert_eq!(empty.global_smooth_objective(&x), 0.0);
    assert_eq!(empty.local_euclidean_gradient(1, &x), DMatrix::zeros(4, 2));
}

#[test]
fn gradients_respect_lipschitz_and_bound_on_the_manifold() {
    let inst = instance(57);
    let mut g = rng(57);
    for _ in 0..200 {
        let x = random_point(10, 5, &mut g);
        let y = random_point(10, 5, &mut g);
        for i in 0..inst.node_count() {
            let lf = inst.gradient_lipschitz(i);
            let gx = inst.local_euclidean_gradient(i, &x);
            let gy = inst.local_euclidean_gradient(i, &y);
            assert!((&gx - gy).norm() <= lf * (&x - &y).norm() * (1.0 + 1e-10));
            assert!(gx.norm() <= lf * 5f64.sqrt() * (1.0 + 1e-10));
        }
    }
}

#[test]
fn binary_and_csv_files_load() {
    let a = synthesize(&recipe(ExponentKind::Geometric, 58)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("a.mxa");
    write_matrix(&bin, &a).unwrap();
    assert_eq!(read_matrix(&bin).unwrap(), a);

    let csv = dir.path().join("a.csv");
    std::fs::write(&csv, "2,3\n1,2,3\n4,5,6\n").unwrap();
    let m = read_csv_matrix(&csv).unwrap();
    assert_eq!(m, nalgebra::dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.0]);

    let bad = dir.path().join("bad.mxa");
    std::fs::write(&bad, b"NOPE").unwrap();
    assert!(matches!(read_matrix(&bad), Err(Error::Format { .. })));
}
