//! Decentralized proximal Riemannian EXTRA (PR-EXTRA) for composite problems
//!
//! ```text
//! min_{x ∈ St(d,r)}  (1/n) Σ_i f_i(x) + r(x)
//! ```
//!
//! over a connected network of `n` agents, with the Euclidean PG-EXTRA
//! reference and a reconstructed DRSM baseline.
//!
//! Module map:
//!
//! - [`stiefel`]: projection, tangent spaces, feasibility residuals
//! - [`regularizer`]: `ℓ1`, `ℓ2,1` and zero regularizers with their prox and subdifferentials
//! - [`tangent_prox`]: the tangent-space proximal subproblem (semismooth Newton)
//! - [`network`]: Erdős–Rényi graphs and Metropolis–Hastings mixing matrices
//! - [`problems`]: sparse PCA / CISE instances and data files
//! - [`algorithms`]: PR-EXTRA, PG-EXTRA and DRSM iterations
//! - [`metrics`]: stationarity, consensus and rate estimation
//! - [`runner`]: configs, the simulation loop and trajectory output
//! - [`validate`]: runtime self-checks
//!
//! Runnable walkthroughs live in `examples/`, e.g.
//! `cargo run --release --example spca_pr_extra`.

pub mod algorithms;
pub mod error;
pub mod metrics;
pub mod network;
pub mod problems;
pub mod regularizer;
pub mod runner;
pub mod stiefel;
pub mod tangent_prox;
pub mod validate;

pub use error::{Error, Result};
pub use regularizer::{RegularizerKind, RegularizerSpec};
pub use runner::{compare, run, RunConfig, RunOutput};
pub use stiefel::{project_to_manifold, project_to_tangent, StiefelPoint};
