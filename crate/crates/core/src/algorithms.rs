//! Decentralized algorithms.
//!
//! * [`pr_extra_step`]: proximal Riemannian EXTRA on `St(d, r)`. One round per
//!   iteration; each node runs
//!
//!   ```text
//!   s_i ← s_i + Σ_j (w_ij − w̃_ij) x_j,k−1 − α (grad f_i(x_i,k) − grad f_i(x_i,k−1))   (k ≥ 1)
//!   y_i ← P_M(Σ_j w_ij x_j,k + s_i)
//!   η_i ← argmin_{η ∈ T_y M} ‖η‖²/(2τ) + r(y_i + η)
//!   x_i,k+1 ← P_M(y_i + η_i)
//!   ```
//!
//!   starting from a common `x_0` with `s_i,0 = −α grad f_i(x_0)`.
//! * [`pg_extra_coupled_step`] / [`pg_extra_decoupled_step`]: the Euclidean
//!   proximal EXTRA in its two equivalent forms, used as a reference.
//! * [`drsm_step`]: a projected Riemannian subgradient consensus step with
//!   diminishing stepsize. This is a reconstruction of the DRSM baseline and
//!   is labelled as such wherever it is reported.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::MixingMatrix;
use crate::problems::{gaussian_matrix, ProblemInstance};
use crate::regularizer::DEFAULT_ZERO_TOL;
use crate::stiefel::{orthonormality_residual, project_to_manifold, tangent_component, AmbientMatrix, StiefelPoint};
use crate::tangent_prox::{SolveMethod, SubproblemSolver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub alpha: f64,
    pub tau: f64,
    pub max_iters: usize,
    pub consensus_stop: f64,
    pub subproblem_tol: f64,
    #[serde(default)]
    pub warm_start: bool,
    /// Run per-node updates on the rayon pool. Results are bit-identical to
    /// the sequential schedule.
    #[serde(default)]
    pub parallel: bool,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            tau: 1e-3,
            max_iters: 3000,
            consensus_stop: 1e-12,
            subproblem_tol: crate::tangent_prox::DEFAULT_TOL,
            warm_start: false,
            parallel: false,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("tau", self.tau)?;
        positive("subproblem_tol", self.subproblem_tol)?;
        if !(self.consensus_stop >= 0.0) {
            return Err(Error::InvalidConfig("consensus_stop must be >= 0".into()));
        }
        Ok(())
    }

    fn solver(&self) -> SubproblemSolver {
        SubproblemSolver {
            tol: self.subproblem_tol,
            ..Default::default()
        }
    }
}

/// `P_M` of a seeded Gaussian `d×r` matrix.
pub fn random_stiefel_point(d: usize, r: usize, seed: u64) -> Result<StiefelPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    project_to_manifold(&gaussian_matrix(d, r, &mut rng))
}

/// Per-node PR-EXTRA state.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    /// `x_i,k`
    pub x: StiefelPoint,
    /// `s_i,k−1` before the step at `k` (`s_i,0` when `k = 0`).
    pub s: AmbientMatrix,
    /// `grad f_i(x_i,k−1)`; at `k = 0` this is `grad f_i(x_0)`.
    pub g_prev: AmbientMatrix,
    /// `Σ_j (w_ij − w̃_ij) x_j,k−1`, computed from the snapshot received in
    /// the previous round. `None` before the first step.
    pub correction: Option<AmbientMatrix>,
    /// Subproblem multiplier from the last solve (used when warm starting).
    pub multiplier: DMatrix<f64>,
}

/// Broadcasts `x0` and sets `s_i,0 = −α grad f_i(x0)`.
pub fn pr_extra_init(inst: &ProblemInstance, x0: &StiefelPoint, cfg: &AlgorithmConfig) -> Vec<NodeState> {
    let (_, r) = inst.dims();
    (0..inst.node_count())
        .map(|i| {
            let g = inst.local_riemannian_gradient(i, x0);
            NodeState {
                x: x0.clone(),
                s: &g * -cfg.alpha,
                g_prev: g,
                correction: None,
                multiplier: DMatrix::zeros(r, r),
            }
        })
        .collect()
}

/// Diagnostics of one PR-EXTRA iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// `‖η_i,k‖` per node.
    pub eta_norms: Vec<f64>,
    /// Largest `‖yᵀy − I‖_F` over nodes.
    pub max_y_residual: f64,
    /// Largest `‖xᵀx − I‖_F` over the new iterates.
    pub max_x_residual: f64,
    pub max_inner_iterations: usize,
    /// Number of nodes whose subproblem needed the fixed-point fallback.
    pub fallback_count: usize,
}

impl StepReport {
    pub fn eta_max(&self) -> f64 {
        self.eta_norms.iter().copied().fold(0.0, f64::max)
    }

    /// `Σ_i ‖η_i,k‖²`
    pub fn eta_stacked_sq(&self) -> f64 {
        self.eta_norms.iter().map(|v| v * v).sum()
    }
}

struct NodeOutcome {
    state: NodeState,
    eta_norm: f64,
    y_residual: f64,
    x_residual: f64,
    inner_iterations: usize,
    method: SolveMethod,
}

/// `Σ_j weight(i, j) x_j`, own term first and then neighbors in index
/// order, so nodes in symmetric positions round identically.
fn ordered_sum(i: usize, xs: &[&AmbientMatrix], weight: impl Fn(usize) -> f64) -> AmbientMatrix {
    let mut acc = xs[i] * weight(i);
    for (j, x) in xs.iter().enumerate() {
        let w = weight(j);
        if j != i && w != 0.0 {
            acc += *x * w;
        }
    }
    acc
}

fn weighted_sum(weights: &DMatrix<f64>, i: usize, xs: &[&AmbientMatrix]) -> AmbientMatrix {
    ordered_sum(i, xs, |j| weights[(i, j)])
}

fn correction_sum(mixing: &MixingMatrix, i: usize, xs: &[&AmbientMatrix]) -> AmbientMatrix {
    ordered_sum(i, xs, |j| mixing.w()[(i, j)] - mixing.w_tilde()[(i, j)])
}

fn pr_extra_node(
    i: usize,
    state: &NodeState,
    snapshot: &[&AmbientMatrix],
    mixing: &MixingMatrix,
    inst: &ProblemInstance,
    cfg: &AlgorithmConfig,
    k: usize,
) -> Result<NodeOutcome> {
    let mut s = state.s.clone();
    let mut g_prev = state.g_prev.clone();
    if k > 0 {
        let correction = state.correction.as_ref().ok_or_else(|| {
            Error::InvalidConfig(format!("node {i}: step {k} called without a previous round"))
        })?;
        let g = inst.local_riemannian_gradient(i, &state.x);
        s += correction;
        s -= (&g - &g_prev) * cfg.alpha;
        g_prev = g;
    }

    let y = project_to_manifold(&(weighted_sum(mixing.w(), i, snapshot) + &s))?;
    let warm = cfg.warm_start.then_some(&state.multiplier);
    let sub = cfg.solver().solve(&y, inst.regularizer(), cfg.tau, warm)?;
    let eta_norm = sub.eta.norm();
    let x = project_to_manifold(&(y.as_matrix() + sub.eta.as_matrix()))?;

    Ok(NodeOutcome {
        y_residual: orthonormality_residual(y.as_matrix()),
        x_residual: orthonormality_residual(x.as_matrix()),
        eta_norm,
        inner_iterations: sub.inner_iterations,
        method: sub.method_used,
        state: NodeState {
            x,
            s,
            g_prev,
            correction: Some(correction_sum(mixing, i, snapshot)),
            multiplier: sub.multiplier,
        },
    })
}

/// One synchronous PR-EXTRA round. All neighbor reads use the round-`k`
/// snapshot of the current iterates.
pub fn pr_extra_step(
    states: &[NodeState],
    mixing: &MixingMatrix,
    inst: &ProblemInstance,
    cfg: &AlgorithmConfig,
    k: usize,
) -> Result<(Vec<NodeState>, StepReport)> {
    check_sizes(states.len(), mixing, inst)?;
    let snapshot: Vec<&AmbientMatrix> = states.iter().map(|s| s.x.as_matrix()).collect();
    let update = |(i, state): (usize, &NodeState)| pr_extra_node(i, state, &snapshot, mixing, inst, cfg, k);
    let outcomes: Vec<NodeOutcome> = if cfg.parallel {
        states.par_iter().enumerate().map(update).collect::<Result<_>>()?
    } else {
        states.iter().enumerate().map(update).collect::<Result<_>>()?
    };

    let mut report = StepReport::default();
    let mut next = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        report.eta_norms.push(o.eta_norm);
        report.max_y_residual = report.max_y_residual.max(o.y_residual);
        report.max_x_residual = report.max_x_residual.max(o.x_residual);
        report.max_inner_iterations = report.max_inner_iterations.max(o.inner_iterations);
        if o.method == SolveMethod::FixedPoint {
            report.fallback_count += 1;
        }
        next.push(o.state);
    }
    Ok((next, report))
}

fn check_sizes(nodes: usize, mixing: &MixingMatrix, inst: &ProblemInstance) -> Result<()> {
    if nodes == 0 || nodes != mixing.size() || nodes != inst.node_count() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} nodes", inst.node_count()),
            got: format!("{nodes} states, {}x{} mixing matrix", mixing.size(), mixing.size()),
        });
    }
    Ok(())
}

/// Reconstructed DRSM step:
/// `x_i ← P_M(Σ_j w_ij x_j − β_k P_T(∇f_i(x_i) + g_i))`, `β_k = β₀/√(k+1)`,
/// with `g_i` the fixed part of `∂r(x_i)` (zero on free entries).
pub fn drsm_step(
    xs: &[StiefelPoint],
    mixing: &MixingMatrix,
    inst: &ProblemInstance,
    beta0: f64,
    k: usize,
) -> Result<Vec<StiefelPoint>> {
    check_sizes(xs.len(), mixing, inst)?;
    let beta = beta0 / ((k + 1) as f64).sqrt();
    let snapshot: Vec<&AmbientMatrix> = xs.iter().map(|x| x.as_matrix()).collect();
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let sub = inst.regularizer().subdifferential_at(x.as_matrix(), DEFAULT_ZERO_TOL);
            let direction = inst.local_euclidean_gradient(i, x.as_matrix()) + sub.fixed_part;
            let step = tangent_component(x, &direction);
            project_to_manifold(&(weighted_sum(mixing.w(), i, &snapshot) - step * beta))
        })
        .collect()
}

/// Coupled proximal EXTRA state: `(x_k, x_{k+1}, y_k)` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledExtraState {
    pub x_prev: Vec<AmbientMatrix>,
    pub x: Vec<AmbientMatrix>,
    pub y: Vec<AmbientMatrix>,
}

/// Decoupled proximal EXTRA state: `(x_k, s_k, y_k)` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledExtraState {
    pub x: Vec<AmbientMatrix>,
    pub s: Vec<AmbientMatrix>,
    pub y: Vec<AmbientMatrix>,
}

fn mix_all(weights: &DMatrix<f64>, xs: &[AmbientMatrix]) -> Vec<AmbientMatrix> {
    let refs: Vec<&AmbientMatrix> = xs.iter().collect();
    (0..xs.len()).map(|i| weighted_sum(weights, i, &refs)).collect()
}

/// `y_0 = W x_0 − α∇f(x_0)`, `x_1 = prox_{αr}(y_0)`.
pub fn pg_extra_coupled_init(x0: &[AmbientMatrix], mixing: &MixingMatrix, inst: &ProblemInstance, alpha: f64) -> CoupledExtraState {
    let reg = inst.regularizer();
    let wx = mix_all(mixing.w(), x0);
    let y: Vec<AmbientMatrix> = wx
        .into_iter()
        .enumerate()
        .map(|(i, m)| m - inst.local_euclidean_gradient(i, &x0[i]) * alpha)
        .collect();
    let x = y.iter().map(|v| reg.euclidean_prox(v, alpha)).collect();
    CoupledExtraState {
        x_prev: x0.to_vec(),
        x,
        y,
    }
}

/// `y_{k+1} = y_k − α[∇f(x_{k+1}) − ∇f(x_k)] + W x_{k+1} − W̃ x_k`,
/// `x_{k+2} = prox_{αr}(y_{k+1})`.
pub fn pg_extra_coupled_step(
    state: &CoupledExtraState,
    mixing: &MixingMatrix,
    inst: &ProblemInstance,
    alpha: f64,
) -> CoupledExtraState {
    let reg = inst.regularizer();
    let wx = mix_all(mixing.w(), &state.x);
    let wtx = mix_all(mixing.w_tilde(), &state.x_prev);
    let y: Vec<AmbientMatrix> = (0..state.x.len())
        .map(|i| {
            let grad_diff =
                inst.local_euclidean_gradient(i, &state.x[i]) - inst.local_euclidean_gradient(i, &state.x_prev[i]);
            &state.y[i] - grad_diff * alpha + &wx[i] - &wtx[i]
        })
        .collect();
    let x = y.iter().map(|v| reg.euclidean_prox(v, alpha)).collect();
    CoupledExtraState {
        x_prev: state.x.clone(),
        x,
        y,
    }
}

/// `s_0 = −α∇f(x_0)`, `y_0 = W x_0 + s_0`.
pub fn pg_extra_decoupled_init(
    x0: &[AmbientMatrix],
    mixing: &MixingMatrix,
    inst: &ProblemInstance,
    alpha: f64,
) -> DecoupledExtraState {
    let s: Vec<AmbientMatrix> = (0..x0.len())
        .map(|i| inst.local_euclidean_gradient(i, &x0[i]) * -alpha)
        .collect();
    let y = mix_all(mixing.w(), x0).into_iter().zip(&s).map(|(m, s)| m + s).collect();
    DecoupledExtraState { x: x0.to_vec(), s, y }
}

/// `x_{k+1} = prox_{αr}(y_k)`,
/// `s_{k+1} = s_k + (W − W̃) x_k − α[∇f(x_{k+1}) − ∇f(x_k)]`,
/// `y_{k+1} = W x_{k+1} + s_{k+1}`.
pub fn pg_extra_decoupled_step(
    state: &DecoupledExtraState,
    mixing: &MixingMatrix,
    inst: &ProblemInstance,
    alpha: f64,
) -> DecoupledExtraState {
    let reg = inst.regularizer();
    let x: Vec<AmbientMatrix> = state.y.iter().map(|v| reg.euclidean_prox(v, alpha)).collect();
    let refs: Vec<&AmbientMatrix> = state.x.iter().collect();
    let s: Vec<AmbientMatrix> = (0..x.len())
        .map(|i| {
            let grad_diff = inst.local_euclidean_gradient(i, &x[i]) - inst.local_euclidean_gradient(i, &state.x[i]);
            &state.s[i] + correction_sum(mixing, i, &refs) - grad_diff * alpha
        })
        .collect();
    let y = mix_all(mixing.w(), &x).into_iter().zip(&s).map(|(m, s)| m + s).collect();
    DecoupledExtraState { x, s, y }
}
