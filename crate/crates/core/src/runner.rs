//! Simulation driver: configuration, the iteration loop with its stopping
//! rules, and trajectory/summary persistence.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    drsm_step, pg_extra_decoupled_init, pg_extra_decoupled_step, pr_extra_init, pr_extra_step, random_stiefel_point,
    AlgorithmConfig, NodeState,
};
use crate::error::{Error, Result};
use crate::metrics::{
    consensus_potential, euclidean_kkt, euclidean_mean, kkt_violation, manifold_mean, mean_squared_distance,
    riemannian_gradient_norm, TrajectoryRecord,
};
use crate::network::{generate_er_graph, metropolis_weights, Graph, MixingMatrix};
use crate::problems::{
    partition, read_csv_matrix, read_matrix, ExponentKind, ProblemInstance, ProblemKind, SpectralRecipe,
};
use crate::regularizer::{RegularizerKind, RegularizerSpec, DEFAULT_ZERO_TOL};
use crate::stiefel::{AmbientMatrix, StiefelPoint};
use crate::tangent_prox::{self, STEP_BOUND_SLACK};

/// Column order of every trajectory CSV.
pub const CSV_HEADER: [&str; 9] = [
    "algorithm",
    "k",
    "kkt",
    "consensus",
    "objective",
    "grad_norm",
    "eta_max",
    "phi",
    "wall_ms",
];

pub const SPCA_LAMBDA: f64 = 1e-3;
pub const CISE_LAMBDA: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemConfig {
    Spca,
    Cise,
    /// Data matrix loaded from an `MXA1` binary or a CSV file (by extension).
    External {
        path: PathBuf,
        #[serde(default = "default_external_reg")]
        regularizer: RegularizerKind,
    },
    /// Random convex quadratics; required by PG-EXTRA.
    Quadratic,
}

fn default_external_reg() -> RegularizerKind {
    RegularizerKind::L1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    PrExtra {
        #[serde(default = "default_step")]
        alpha: f64,
        #[serde(default = "default_step")]
        tau: f64,
    },
    PgExtra {
        #[serde(default = "default_pg_alpha")]
        alpha: f64,
    },
    /// Reconstructed baseline; stepsize `beta0/√(k+1)`.
    Drsm {
        #[serde(default = "default_beta0")]
        beta0: f64,
    },
}

fn default_step() -> f64 {
    1e-3
}

fn default_pg_alpha() -> f64 {
    0.1
}

fn default_beta0() -> f64 {
    1.0
}

impl AlgorithmSpec {
    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmSpec::PrExtra { .. } => "PR-EXTRA",
            AlgorithmSpec::PgExtra { .. } => "PG-EXTRA",
            AlgorithmSpec::Drsm { .. } => "DRSM (reconstructed)",
        }
    }
}

impl Default for AlgorithmSpec {
    fn default() -> Self {
        AlgorithmSpec::PrExtra {
            alpha: default_step(),
            tau: default_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    #[serde(default = "default_p")]
    pub p: f64,
    /// Overrides the derived graph seed (`seed + 1`).
    #[serde(default)]
    pub seed: Option<u64>,
    /// Mixing matrix text file; replaces the random graph when set.
    #[serde(default)]
    pub weights_file: Option<PathBuf>,
}

fn default_p() -> f64 {
    0.6
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            p: default_p(),
            seed: None,
            weights_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub xi: f64,
    /// Defaults to 1e-3 for SPCA and 1e-2 for CISE.
    pub lambda: Option<f64>,
    pub graph: GraphConfig,
    pub algorithm: AlgorithmSpec,
    pub max_iters: usize,
    pub eps_cons: f64,
    /// Record (and test the stopping rule) every `cadence` iterations.
    pub cadence: usize,
    pub subproblem_tol: f64,
    pub warm_start: bool,
    pub parallel: bool,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::Spca,
            n: 8,
            d: 10,
            r: 5,
            m: 8000,
            xi: 0.8,
            lambda: None,
            graph: GraphConfig::default(),
            algorithm: AlgorithmSpec::default(),
            max_iters: 3000,
            eps_cons: 1e-12,
            cadence: 1,
            subproblem_tol: tangent_prox::DEFAULT_TOL,
            warm_start: false,
            parallel: false,
            output_dir: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub graph: u64,
    pub data: u64,
    pub init: u64,
}

impl RunConfig {
    pub fn spca() -> Self {
        Self::default()
    }

    pub fn cise() -> Self {
        Self {
            problem: ProblemConfig::Cise,
            ..Self::default()
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(match self.problem {
            ProblemConfig::Cise => CISE_LAMBDA,
            _ => SPCA_LAMBDA,
        })
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            master: self.seed,
            graph: self.graph.seed.unwrap_or(self.seed.wrapping_add(1)),
            data: self.seed.wrapping_add(2),
            init: self.seed.wrapping_add(3),
        }
    }

    pub fn regularizer(&self) -> Result<RegularizerSpec> {
        let kind = match &self.problem {
            ProblemConfig::Spca | ProblemConfig::Quadratic => RegularizerKind::L1,
            ProblemConfig::Cise => RegularizerKind::L21,
            ProblemConfig::External { regularizer, .. } => *regularizer,
        };
        RegularizerSpec::new(kind, self.lambda())
    }

    pub fn recipe(&self) -> Option<SpectralRecipe> {
        let exponent_kind = match self.problem {
            ProblemConfig::Spca => ExponentKind::Geometric,
            ProblemConfig::Cise => ExponentKind::HalfGeometric,
            _ => return None,
        };
        Some(SpectralRecipe {
            m: self.m,
            d: self.d,
            xi: self.xi,
            exponent_kind,
            seed: self.seeds().data,
        })
    }

    pub fn algorithm_config(&self) -> AlgorithmConfig {
        let (alpha, tau) = match self.algorithm {
            AlgorithmSpec::PrExtra { alpha, tau } => (alpha, tau),
            AlgorithmSpec::PgExtra { alpha } => (alpha, default_step()),
            AlgorithmSpec::Drsm { .. } => (default_step(), default_step()),
        };
        AlgorithmConfig {
            alpha,
            tau,
            max_iters: self.max_iters,
            consensus_stop: self.eps_cons,
            subproblem_tol: self.subproblem_tol,
            warm_start: self.warm_start,
            parallel: self.parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 || self.r == 0 || self.r > self.d {
            return bad(format!("need n >= 1 and 0 < r <= d (n={}, d={}, r={})", self.n, self.d, self.r));
        }
        if self.cadence == 0 {
            return bad("cadence must be >= 1".into());
        }
        if !(self.eps_cons >= 0.0) {
            return bad("eps_cons must be >= 0".into());
        }
        if self.graph.weights_file.is_none() && !(self.graph.p > 0.0 && self.graph.p <= 1.0) {
            return bad(format!("graph.p must lie in (0, 1], got {}", self.graph.p));
        }
        match (&self.algorithm, &self.problem) {
            (AlgorithmSpec::PgExtra { .. }, ProblemConfig::Quadratic) => {}
            (AlgorithmSpec::PgExtra { .. }, _) => {
                return bad("PG-EXTRA is a Euclidean method and needs the quadratic problem".into());
            }
            (AlgorithmSpec::Drsm { beta0 }, _) if !(*beta0 >= 0.0) => {
                return bad(format!("beta0 must be >= 0, got {beta0}"));
            }
            _ => {}
        }
        self.regularizer()?;
        if matches!(self.algorithm, AlgorithmSpec::PrExtra { .. } | AlgorithmSpec::PgExtra { .. }) {
            self.algorithm_config().validate()?;
        }
        Ok(())
    }

    /// The fields that define the problem instance, used by [`compare`].
    fn instance_key(&self) -> (ProblemConfig, usize, usize, usize, usize, u64, u64, u64, u64) {
        (
            self.problem.clone(),
            self.n,
            self.d,
            self.r,
            self.m,
            self.xi.to_bits(),
            self.lambda().to_bits(),
            self.seeds().data,
            self.seeds().init,
        )
    }
}

/// Builds the communication graph and its Metropolis–Hastings weights.
/// Returns the graph, the mixing matrix and the seed of the accepted draw.
pub fn build_network(cfg: &RunConfig) -> Result<(Graph, MixingMatrix, Option<u64>, u64)> {
    if let Some(path) = &cfg.graph.weights_file {
        let (g, m) = MixingMatrix::read_text(path)?;
        if g.node_count() != cfg.n {
            return Err(Error::InvalidConfig(format!(
                "weights file has {} nodes, config says {}",
                g.node_count(),
                cfg.n
            )));
        }
        return Ok((g, m, None, 0));
    }
    let sample = generate_er_graph(cfg.n, cfg.graph.p, cfg.seeds().graph)?;
    let mixing = metropolis_weights(&sample.graph);
    Ok((sample.graph, mixing, Some(sample.seed_used), sample.rejected))
}

pub fn build_instance(cfg: &RunConfig) -> Result<ProblemInstance> {
    let reg = cfg.regularizer()?;
    match &cfg.problem {
        ProblemConfig::Spca | ProblemConfig::Cise => {
            let kind = if cfg.problem == ProblemConfig::Spca {
                ProblemKind::Spca
            } else {
                ProblemKind::Cise
            };
            let recipe = cfg.recipe().expect("synthetic problems have a recipe");
            ProblemInstance::synthetic(kind, &recipe, cfg.n, cfg.r, cfg.lambda())
        }
        ProblemConfig::External { path, regularizer } => {
            let a = load_data(path)?;
            let blocks = partition(&a, cfg.n)?;
            ProblemInstance::from_blocks(regularizer.problem_kind(), &blocks, cfg.r, reg)
        }
        ProblemConfig::Quadratic => ProblemInstance::random_quadratic(cfg.n, cfg.d, cfg.r, reg, cfg.seeds().data),
    }
}

/// Loads a data matrix: `.csv` files through the CSV importer, anything else as `MXA1`.
pub fn load_data(path: &Path) -> Result<AmbientMatrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv_matrix(path),
        _ => read_matrix(path),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    MaxIterations,
    ConsensusThreshold,
    Error,
}

/// Feasibility and step-size audit collected over a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunAudit {
    /// Largest `‖xᵀx − I‖_F` over all `x_i,k`.
    pub max_x_residual: f64,
    /// Largest `‖yᵀy − I‖_F` over all `y_i,k` (PR-EXTRA only).
    pub max_y_residual: f64,
    /// Largest `‖η_i,k‖` over the run.
    pub max_eta: f64,
    /// `2τL_r`
    pub eta_bound: f64,
    /// Iterations whose `max_i ‖η_i,k‖` exceeded `2τL_r + slack`.
    pub step_bound_violations: usize,
    /// Subproblem solves that needed the fixed-point fallback.
    pub subproblem_fallbacks: usize,
    /// Consensus error of the initial iterates.
    pub initial_consensus: f64,
    /// Metric evaluations where the kkt inner solver hit its cap.
    pub kkt_inner_caps: usize,
    /// Records where the manifold mean was rank deficient.
    pub missing_means: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub config: RunConfig,
    pub seeds: Seeds,
    /// Seed of the accepted graph draw (after connectivity retries).
    pub graph_seed_used: Option<u64>,
    pub rejected_graph_draws: u64,
    pub realized_average_degree: f64,
    pub spectral_gap: f64,
    pub termination: TerminationReason,
    pub iterations: usize,
    pub error: Option<String>,
    pub final_record: Option<TrajectoryRecord>,
    pub audit: RunAudit,
    pub total_wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TrajectoryRecord>,
    pub summary: RunSummary,
    pub csv_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

enum Iterates {
    PrExtra(Vec<NodeState>),
    Drsm(Vec<StiefelPoint>),
    PgExtra(crate::algorithms::DecoupledExtraState),
}

struct Context<'a> {
    cfg: &'a RunConfig,
    inst: &'a ProblemInstance,
    mixing: &'a MixingMatrix,
    algo: AlgorithmConfig,
}

impl Iterates {
    fn advance(self, ctx: &Context<'_>, k: usize, audit: &mut RunAudit) -> Result<(Self, Vec<f64>)> {
        match self {
            Iterates::PrExtra(states) => {
                let (next, report) = pr_extra_step(&states, ctx.mixing, ctx.inst, &ctx.algo, k)?;
                audit.max_y_residual = audit.max_y_residual.max(report.max_y_residual);
                audit.max_x_residual = audit.max_x_residual.max(report.max_x_residual);
                audit.max_eta = audit.max_eta.max(report.eta_max());
                audit.subproblem_fallbacks += report.fallback_count;
                if report.eta_max() > audit.eta_bound + STEP_BOUND_SLACK {
                    audit.step_bound_violations += 1;
                }
                Ok((Iterates::PrExtra(next), report.eta_norms))
            }
            Iterates::Drsm(xs) => {
                let beta0 = match ctx.cfg.algorithm {
                    AlgorithmSpec::Drsm { beta0 } => beta0,
                    _ => unreachable!("DRSM iterates only come from a DRSM config"),
                };
                let next = drsm_step(&xs, ctx.mixing, ctx.inst, beta0, k)?;
                for x in &next {
                    audit.max_x_residual = audit
                        .max_x_residual
                        .max(crate::stiefel::orthonormality_residual(x.as_matrix()));
                }
                let n = next.len();
                Ok((Iterates::Drsm(next), vec![0.0; n]))
            }
            Iterates::PgExtra(state) => {
                let next = pg_extra_decoupled_step(&state, ctx.mixing, ctx.inst, ctx.algo.alpha);
                let n = next.x.len();
                Ok((Iterates::PgExtra(next), vec![0.0; n]))
            }
        }
    }

    fn points(&self) -> Vec<&AmbientMatrix> {
        match self {
            Iterates::PrExtra(states) => states.iter().map(|s| s.x.as_matrix()).collect(),
            Iterates::Drsm(xs) => xs.iter().map(|x| x.as_matrix()).collect(),
            Iterates::PgExtra(state) => state.x.iter().collect(),
        }
    }
}

struct Measured {
    kkt: Option<f64>,
    consensus: Option<f64>,
    objective: Option<f64>,
    grad_norm: Option<f64>,
}

fn measure(ctx: &Context<'_>, iterates: &Iterates, audit: &mut RunAudit) -> Measured {
    let inst = ctx.inst;
    match iterates {
        Iterates::PgExtra(state) => {
            let mean = euclidean_mean(&state.x);
            Measured {
                kkt: Some(euclidean_kkt(inst, &mean, DEFAULT_ZERO_TOL)),
                consensus: Some(mean_squared_distance(&state.x, &mean)),
                objective: Some(inst.objective(&mean)),
                grad_norm: Some(inst.global_gradient(&mean).norm()),
            }
        }
        _ => {
            let points: Vec<StiefelPoint> = match iterates {
                Iterates::PrExtra(states) => states.iter().map(|s| s.x.clone()).collect(),
                Iterates::Drsm(xs) => xs.clone(),
                Iterates::PgExtra(_) => unreachable!(),
            };
            match manifold_mean(&points) {
                Ok(xbar) => {
                    let kkt = kkt_violation(inst, &xbar, DEFAULT_ZERO_TOL);
                    if !kkt.converged {
                        audit.kkt_inner_caps += 1;
                    }
                    Measured {
                        kkt: Some(kkt.value),
                        consensus: Some(mean_squared_distance(&points, xbar.as_matrix())),
                        objective: Some(inst.objective(xbar.as_matrix())),
                        grad_norm: Some(riemannian_gradient_norm(inst, &xbar)),
                    }
                }
                Err(_) => {
                    audit.missing_means += 1;
                    Measured {
                        kkt: None,
                        consensus: None,
                        objective: None,
                        grad_norm: None,
                    }
                }
            }
        }
    }
}

/// Runs one configuration end to end. Configuration problems are returned as
/// errors; failures during the iteration are recorded in the summary.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let (graph, mixing, graph_seed_used, rejected) = build_network(cfg)?;
    let inst = build_instance(cfg)?;
    let (d, r) = inst.dims();
    let x0 = random_stiefel_point(d, r, cfg.seeds().init)?;
    let algo = cfg.algorithm_config();

    let mut audit = RunAudit {
        eta_bound: match cfg.algorithm {
            AlgorithmSpec::PrExtra { tau, .. } => 2.0 * tau * inst.regularizer().lipschitz_constant(d, r),
            _ => 0.0,
        },
        max_x_residual: crate::stiefel::orthonormality_residual(x0.as_matrix()),
        ..Default::default()
    };
    let mut iterates = match cfg.algorithm {
        AlgorithmSpec::PrExtra { .. } => Iterates::PrExtra(pr_extra_init(&inst, &x0, &algo)),
        AlgorithmSpec::Drsm { .. } => Iterates::Drsm(vec![x0.clone(); cfg.n]),
        AlgorithmSpec::PgExtra { alpha } => {
            let starts = vec![x0.as_matrix().clone(); cfg.n];
            Iterates::PgExtra(pg_extra_decoupled_init(&starts, &mixing, &inst, alpha))
        }
    };
    let ctx = Context {
        cfg,
        inst: &inst,
        mixing: &mixing,
        algo,
    };
    audit.initial_consensus = mean_squared_distance(&iterates.points(), &euclidean_mean(&iterates.points()));

    let mut records = Vec::new();
    let mut termination = TerminationReason::MaxIterations;
    let mut error = None;
    let mut iterations = 0;
    for k in 0..cfg.max_iters {
        let (next, eta_norms) = match iterates.advance(&ctx, k, &mut audit) {
            Ok(v) => v,
            Err(e) => {
                termination = TerminationReason::Error;
                error = Some(e.to_string());
                break;
            }
        };
        iterates = next;
        iterations = k + 1;
        if k % cfg.cadence != 0 {
            continue;
        }
        let measured = measure(&ctx, &iterates, &mut audit);
        let rec = TrajectoryRecord {
            k,
            kkt: measured.kkt,
            consensus: measured.consensus,
            objective: measured.objective,
            grad_norm: measured.grad_norm,
            eta_max: eta_norms.iter().copied().fold(0.0, f64::max),
            eta_stacked_sq: eta_norms.iter().map(|v| v * v).sum(),
            phi: consensus_potential(&iterates.points(), &mixing),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        let stop = rec.consensus.is_some_and(|c| c < cfg.eps_cons);
        records.push(rec);
        if stop {
            termination = TerminationReason::ConsensusThreshold;
            break;
        }
    }

    let summary = RunSummary {
        algorithm: cfg.algorithm.label().to_string(),
        config: cfg.clone(),
        seeds: cfg.seeds(),
        graph_seed_used,
        rejected_graph_draws: rejected,
        realized_average_degree: graph.average_degree(),
        spectral_gap: mixing.spectral_gap(),
        termination,
        iterations,
        error,
        final_record: records.last().cloned(),
        audit,
        total_wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };

    let (csv_path, summary_path) = match &cfg.output_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let csv_path = dir.join("trajectory.csv");
            write_trajectory_csv(&csv_path, &[(summary.algorithm.as_str(), records.as_slice())])?;
            let summary_path = dir.join("summary.json");
            fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
            (Some(csv_path), Some(summary_path))
        }
        None => (None, None),
    };

    Ok(RunOutput {
        records,
        summary,
        csv_path,
        summary_path,
    })
}

/// 17 significant digits; missing values become empty fields.
pub fn format_float(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

pub fn write_trajectory_csv(path: &Path, groups: &[(&str, &[TrajectoryRecord])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for (label, records) in groups {
        for rec in *records {
            w.write_record([
                label.to_string(),
                rec.k.to_string(),
                format_float(rec.kkt),
                format_float(rec.consensus),
                format_float(rec.objective),
                format_float(rec.grad_norm),
                format_float(Some(rec.eta_max)),
                format_float(Some(rec.phi)),
                format_float(Some(rec.wall_ms)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub csv_path: PathBuf,
    pub runs: Vec<RunOutput>,
}

/// Runs every config on a shared problem instance and merges the
/// trajectories into one algorithm-tagged CSV.
pub fn compare(cfgs: &[RunConfig], out: &Path) -> Result<CompareOutput> {
    let Some(first) = cfgs.first() else {
        return Err(Error::InvalidConfig("compare needs at least one config".into()));
    };
    let key = first.instance_key();
    for (i, cfg) in cfgs.iter().enumerate().skip(1) {
        if cfg.instance_key() != key {
            return Err(Error::MismatchedInstances(format!(
                "config {i} differs from config 0 in problem, dimensions, lambda or data/init seed"
            )));
        }
    }
    let runs = cfgs.iter().map(run).collect::<Result<Vec<_>>>()?;
    let groups: Vec<(&str, &[TrajectoryRecord])> = runs
        .iter()
        .map(|r| (r.summary.algorithm.as_str(), r.records.as_slice()))
        .collect();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_trajectory_csv(out, &groups)?;
    Ok(CompareOutput {
        csv_path: out.to_path_buf(),
        runs,
    })
}
