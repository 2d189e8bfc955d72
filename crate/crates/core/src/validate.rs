//! Runtime self-checks behind the `validate` command.
//!
//! Every check produces a [`ValidationGroup`]; nothing here returns an error,
//! failures are report entries.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::{pr_extra_init, pr_extra_step, random_stiefel_point, AlgorithmConfig};
use crate::network::{check_mixing, Graph, MixingMatrix};
use crate::problems::{gaussian_matrix, ProblemInstance};
use crate::regularizer::RegularizerSpec;
use crate::runner::{build_instance, build_network, AlgorithmSpec, RunConfig};
use crate::stiefel::{projection_remainder_ratio, tangent_component, AmbientMatrix, StiefelPoint};
use crate::tangent_prox::{solve_subproblem, subproblem_objective, STEP_BOUND_SLACK};

pub const MIXING_TOL: f64 = 1e-12;
pub const FD_STEP: f64 = 1e-6;
pub const FD_TOL: f64 = 1e-5;
pub const ORACLE_TOL: f64 = 1e-6;
const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationGroup {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub detail: String,
}

impl ValidationGroup {
    fn new(name: &str, passed: bool, checks: usize, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            checks,
            detail,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub groups: Vec<ValidationGroup>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.passed)
    }

    pub fn group(&self, name: &str) -> Option<&ValidationGroup> {
        self.groups.iter().find(|g| g.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.groups {
            let tag = if g.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag}  {:<28} {:>6} checks  {}", g.name, g.checks, g.detail)?;
        }
        Ok(())
    }
}

/// Runs every check against the instance and network described by `cfg`.
pub fn validate(cfg: &RunConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = cfg.validate() {
        report.groups.push(ValidationGroup::new("config", false, 1, e.to_string()));
        return report;
    }
    match build_network(cfg) {
        Ok((graph, mixing, _, _)) => report.groups.push(check_mixing_group(&mixing, Some(&graph))),
        Err(e) => report.groups.push(ValidationGroup::new("mixing-matrix", false, 1, e.to_string())),
    }
    let inst = match build_instance(cfg) {
        Ok(inst) => inst,
        Err(e) => {
            report.groups.push(ValidationGroup::new("problem-instance", false, 1, e.to_string()));
            return report;
        }
    };
    report.groups.push(check_gradients(&inst));
    report.groups.push(check_lipschitz(&inst));
    report.groups.push(check_projection_remainder(inst.dims().0, inst.dims().1));
    report.groups.push(check_subproblem_oracle(inst.regularizer()));
    if let Ok((_, mixing, _, _)) = build_network(cfg) {
        report.groups.push(check_step_bound(cfg, &inst, &mixing));
    }
    report
}

pub fn check_mixing_group(mixing: &MixingMatrix, graph: Option<&Graph>) -> ValidationGroup {
    let c = check_mixing(mixing, graph);
    ValidationGroup::new(
        "mixing-matrix",
        c.passes(MIXING_TOL),
        7,
        format!(
            "sym {:.1e}, rows {:.1e}, cols {:.1e}, min {:.3e}, min diag {:.3e}, gap {:.4}, support {}",
            c.symmetry_error,
            c.row_sum_error,
            c.col_sum_error,
            c.min_entry,
            c.min_diagonal,
            c.spectral_gap,
            c.support_matches
        ),
    )
}

/// Central differences of every `f_i` in every coordinate at a random point.
pub fn check_gradients(inst: &ProblemInstance) -> ValidationGroup {
    let (d, r) = inst.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let x = gaussian_matrix(d, r, &mut rng);
    let mut worst: f64 = 0.0;
    for i in 0..inst.node_count() {
        let g = inst.local_euclidean_gradient(i, &x);
        let mut fd = AmbientMatrix::zeros(d, r);
        for idx in 0..d * r {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[idx] += FD_STEP;
            xm[idx] -= FD_STEP;
            fd[idx] = (inst.local_objective(i, &xp) - inst.local_objective(i, &xm)) / (2.0 * FD_STEP);
        }
        worst = worst.max((&g - fd).norm() / g.norm().max(1.0));
    }
    ValidationGroup::new(
        "gradient-finite-difference",
        worst <= FD_TOL,
        inst.node_count(),
        format!("max relative error {worst:.2e} (tol {FD_TOL:.0e})"),
    )
}

/// Lipschitz constants of the local gradients and of the regularizer on
/// random pairs inside the ball of radius `√r`.
pub fn check_lipschitz(inst: &ProblemInstance) -> ValidationGroup {
    let (d, r) = inst.dims();
    let reg = inst.regularizer();
    let lr = reg.lipschitz_constant(d, r);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let radius = (r as f64).sqrt();
    let sample = |rng: &mut ChaCha8Rng| {
        let m = gaussian_matrix(d, r, rng);
        let scale = radius * rng.random::<f64>() / m.norm();
        m * scale
    };
    let pairs = 200;
    let mut worst_grad: f64 = 0.0;
    let mut worst_reg: f64 = 0.0;
    for _ in 0..pairs {
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        let dist = (&x - &y).norm();
        if dist == 0.0 {
            continue;
        }
        for i in 0..inst.node_count() {
            let li = inst.gradient_lipschitz(i).max(f64::MIN_POSITIVE);
            let gd = (inst.local_euclidean_gradient(i, &x) - inst.local_euclidean_gradient(i, &y)).norm();
            worst_grad = worst_grad.max(gd / (li * dist));
        }
        if lr > 0.0 {
            worst_reg = worst_reg.max((reg.value(&x) - reg.value(&y)).abs() / (lr * dist));
        }
    }
    let ok = worst_grad <= 1.0 + 1e-9 && worst_reg <= 1.0 + 1e-9;
    ValidationGroup::new(
        "lipschitz-bounds",
        ok,
        pairs,
        format!("max ratio to bound: gradient {worst_grad:.4}, regularizer {worst_reg:.4}"),
    )
}

/// The projection remainder ratio stays bounded as the perturbation shrinks.
pub fn check_projection_remainder(d: usize, r: usize) -> ValidationGroup {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let scales = [1e-2, 5e-3];
    let samples = 200;
    let mut maxima = [0.0f64; 2];
    let mut failures = 0;
    for _ in 0..samples {
        let Ok(x) = random_stiefel_point(d, r, rng.random()) else {
            failures += 1;
            continue;
        };
        let dir = gaussian_matrix(d, r, &mut rng);
        let dir = &dir / dir.norm();
        for (slot, &s) in maxima.iter_mut().zip(&scales) {
            match projection_remainder_ratio(&x, &(&dir * s)) {
                Ok(v) if v.is_finite() => *slot = slot.max(v),
                _ => failures += 1,
            }
        }
    }
    let stable = maxima[1] <= 4.0 * maxima[0] && maxima[0] <= 4.0 * maxima[1].max(f64::MIN_POSITIVE);
    ValidationGroup::new(
        "projection-remainder",
        failures == 0 && stable,
        samples * scales.len(),
        format!("max ratio {:.4} at |u|=1e-2, {:.4} at |u|=5e-3", maxima[0], maxima[1]),
    )
}

/// Reference solution of the tangent subproblem by projected subgradient
/// descent with step `τ/(k+1)`, keeping the best objective value seen.
pub fn subgradient_reference(y: &StiefelPoint, reg: &RegularizerSpec, tau: f64, iters: usize) -> AmbientMatrix {
    let (d, r) = y.dims();
    let mut eta = AmbientMatrix::zeros(d, r);
    let mut best = eta.clone();
    let mut best_val = subproblem_objective(y, reg, tau, &eta);
    for k in 0..iters {
        let z = y.as_matrix() + &eta;
        let sub = reg.subdifferential_at(&z, 0.0).fixed_part;
        let g = tangent_component(y, &(&eta / tau + sub));
        eta -= g * (tau / (k as f64 + 1.0));
        let val = subproblem_objective(y, reg, tau, &eta);
        if val < best_val {
            best_val = val;
            best = eta.clone();
        }
    }
    best
}

/// Newton solver against the subgradient reference on small `St(4,2)` cases.
pub fn check_subproblem_oracle(reg: &RegularizerSpec) -> ValidationGroup {
    let reg = match RegularizerSpec::new(reg.kind, 0.1) {
        Ok(r) => r,
        Err(e) => return ValidationGroup::new("subproblem-oracle", false, 0, e.to_string()),
    };
    let tau = 0.05;
    let cases = 5;
    let mut worst_gap: f64 = 0.0;
    let mut errors = Vec::new();
    for c in 0..cases {
        let Ok(y) = random_stiefel_point(4, 2, SEED + 10 + c as u64) else {
            errors.push(format!("case {c}: bad sample"));
            continue;
        };
        match solve_subproblem(&y, &reg, tau, 1e-12) {
            Ok(sol) => {
                let reference = subgradient_reference(&y, &reg, tau, 100_000);
                let ours = subproblem_objective(&y, &reg, tau, sol.eta.as_matrix());
                let theirs = subproblem_objective(&y, &reg, tau, &reference);
                worst_gap = worst_gap.max(ours - theirs);
            }
            Err(e) => errors.push(format!("case {c}: {e}")),
        }
    }
    let detail = if errors.is_empty() {
        format!("max objective excess over reference {worst_gap:.2e} (tol {ORACLE_TOL:.0e})")
    } else {
        errors.join("; ")
    };
    ValidationGroup::new("subproblem-oracle", errors.is_empty() && worst_gap <= ORACLE_TOL, cases, detail)
}

/// A short PR-EXTRA run; every `‖η_i,k‖` must respect `2τL_r`.
pub fn check_step_bound(cfg: &RunConfig, inst: &ProblemInstance, mixing: &MixingMatrix) -> ValidationGroup {
    let iters = 10;
    let mut algo: AlgorithmConfig = cfg.algorithm_config();
    if !matches!(cfg.algorithm, AlgorithmSpec::PrExtra { .. }) {
        algo = AlgorithmConfig::default();
    }
    let (d, r) = inst.dims();
    let bound = 2.0 * algo.tau * inst.regularizer().lipschitz_constant(d, r);
    let x0 = match random_stiefel_point(d, r, cfg.seeds().init) {
        Ok(x) => x,
        Err(e) => return ValidationGroup::new("step-bound", false, 0, e.to_string()),
    };
    let mut states = pr_extra_init(inst, &x0, &algo);
    let mut max_eta: f64 = 0.0;
    for k in 0..iters {
        match pr_extra_step(&states, mixing, inst, &algo, k) {
            Ok((next, report)) => {
                max_eta = max_eta.max(report.eta_max());
                states = next;
            }
            Err(e) => return ValidationGroup::new("step-bound", false, k, e.to_string()),
        }
    }
    ValidationGroup::new(
        "step-bound",
        max_eta <= bound + STEP_BOUND_SLACK,
        iters * inst.node_count(),
        format!("max |eta| {max_eta:.3e}, bound {bound:.3e}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::metropolis_weights;
    use nalgebra::DMatrix;

    fn small_cfg() -> RunConfig {
        RunConfig {
            n: 4,
            d: 6,
            r: 2,
            m: 400,
            ..RunConfig::spca()
        }
    }

    #[test]
    fn small_spca_passes() {
        let report = validate(&small_cfg());
        assert!(report.passed(), "{report}");
        assert_eq!(report.groups.len(), 6);
    }

    #[test]
    fn corrupted_weights_fail() {
        let g = Graph::path(3);
        let mut w: DMatrix<f64> = metropolis_weights(&g).w().clone();
        w[(0, 0)] += 0.01;
        let group = check_mixing_group(&MixingMatrix::from_raw(w), Some(&g));
        assert!(!group.passed);
    }

    #[test]
    fn zero_lambda_means_zero_steps() {
        let cfg = RunConfig {
            lambda: Some(0.0),
            ..small_cfg()
        };
        let report = validate(&cfg);
        let g = report.group("step-bound").unwrap();
        assert!(g.passed, "{}", g.detail);
        assert!(g.detail.starts_with("max |eta| 0.000e0"), "{}", g.detail);
    }

    #[test]
    fn bad_config_is_a_report_entry() {
        let cfg = RunConfig { r: 20, ..small_cfg() };
        let report = validate(&cfg);
        assert!(!report.passed());
        assert_eq!(report.groups[0].name, "config");
    }
}
