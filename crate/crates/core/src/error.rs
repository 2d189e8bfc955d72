use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The polar factor is not unique: the input is (numerically) rank deficient.
    #[error("rank-deficient input to manifold projection (sigma_min = {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("zero perturbation direction")]
    ZeroDirection,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    /// Tangent-space proximal subproblem did not reach the requested tolerance.
    #[error(
        "subproblem did not converge: residual {residual:e} > tol {tol:e} after {newton} newton + {fixed_point} fixed-point iterations"
    )]
    NoConvergence {
        residual: f64,
        tol: f64,
        newton: usize,
        fixed_point: usize,
    },

    #[error("step bound violated: |eta| = {norm:e} exceeds 2*tau*L_r = {bound:e}")]
    StepBoundViolation { norm: f64, bound: f64 },

    #[error("subproblem descent check failed: g(0) - g(eta) = {decrease:e} < |eta|^2/(2 tau) = {required:e}")]
    DescentViolation { decrease: f64, required: f64 },

    #[error("{rows} rows cannot be split evenly across {nodes} nodes")]
    IndivisibleRows { rows: usize, nodes: usize },

    #[error("degenerate random sample (sigma_min = {sigma_min:e})")]
    DegenerateSample { sigma_min: f64 },

    #[error("need at least {needed} points for a slope fit, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("configs describe different problem instances: {0}")]
    MismatchedInstances(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
