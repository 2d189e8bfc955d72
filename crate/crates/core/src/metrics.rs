//! Stationarity and consensus measurements.

use std::borrow::Borrow;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::MixingMatrix;
use crate::problems::ProblemInstance;
use crate::stiefel::{project_to_manifold, tangent_component, AmbientMatrix, StiefelPoint};

/// Gradient-mapping tolerance of the inner box-constrained least squares.
pub const KKT_INNER_TOL: f64 = 1e-8;
pub const KKT_INNER_MAX_ITERS: usize = 100_000;

/// One row of a trajectory. Fields that depend on the manifold mean are
/// `None` when the mean could not be projected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub kkt: Option<f64>,
    pub consensus: Option<f64>,
    pub objective: Option<f64>,
    /// `‖grad f(x̄)‖` of the smooth part alone.
    pub grad_norm: Option<f64>,
    /// `max_i ‖η_i,k‖`
    pub eta_max: f64,
    /// `Σ_i ‖η_i,k‖²`
    pub eta_stacked_sq: f64,
    pub phi: f64,
    pub wall_ms: f64,
}

/// Euclidean mean of the iterates.
pub fn euclidean_mean<M: Borrow<AmbientMatrix>>(xs: &[M]) -> AmbientMatrix {
    let first = xs[0].borrow();
    let sum = xs
        .iter()
        .fold(DMatrix::zeros(first.nrows(), first.ncols()), |acc, x| acc + x.borrow());
    sum / xs.len() as f64
}

/// `x̄ = P_M((1/n) Σ x_i)`.
pub fn manifold_mean(xs: &[StiefelPoint]) -> Result<StiefelPoint> {
    if xs.is_empty() {
        return Err(Error::InvalidConfig("mean of zero points".into()));
    }
    project_to_manifold(&euclidean_mean(xs))
}

/// `(1/n) Σ ‖x_i − center‖²`.
pub fn mean_squared_distance<M: Borrow<AmbientMatrix>>(xs: &[M], center: &AmbientMatrix) -> f64 {
    xs.iter().map(|x| (x.borrow() - center).norm_squared()).sum::<f64>() / xs.len() as f64
}

/// `(1/n) Σ ‖x_i − x̄‖²` with `x̄` the manifold mean.
pub fn consensus_error(xs: &[StiefelPoint]) -> Result<f64> {
    let xbar = manifold_mean(xs)?;
    Ok(mean_squared_distance(xs, xbar.as_matrix()))
}

/// `φ(x) = ¼ Σ_i Σ_j w_ij ‖x_i − x_j‖²`.
pub fn consensus_potential<M: Borrow<AmbientMatrix>>(xs: &[M], mixing: &MixingMatrix) -> f64 {
    let w = mixing.w();
    let n = xs.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let wij = w[(i, j)];
            if wij != 0.0 && i != j {
                total += wij * (xs[i].borrow() - xs[j].borrow()).norm_squared();
            }
        }
    }
    0.25 * total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktValue {
    pub value: f64,
    pub inner_iterations: usize,
    /// False when the inner solver hit its cap; the value is then an upper bound.
    pub converged: bool,
}

/// `min_{g ∈ ∂r(x)} ‖P_T_x(∇f(x) + g)‖_F` where `∇f = (1/n) Σ ∇f_i`.
///
/// The free part of the subdifferential is handled as a box (or row-ball)
/// constrained least-squares problem solved by projected gradient with step
/// `1/L̂`, `L̂` the largest eigenvalue of the projected quadratic.
pub fn kkt_violation(inst: &ProblemInstance, x: &StiefelPoint, zero_tol: f64) -> KktValue {
    let grad = inst.global_gradient(x.as_matrix());
    kkt_from_gradient(inst, x, &grad, zero_tol)
}

fn kkt_from_gradient(inst: &ProblemInstance, x: &StiefelPoint, grad: &AmbientMatrix, zero_tol: f64) -> KktValue {
    let sub = inst.regularizer().subdifferential_at(x.as_matrix(), zero_tol);
    let base = tangent_component(x, &(grad + &sub.fixed_part));
    if sub.is_singleton() {
        return KktValue {
            value: base.norm(),
            inner_iterations: 0,
            converged: true,
        };
    }

    let (d, r) = x.dims();
    let free: Vec<usize> = sub
        .free_mask
        .iter()
        .enumerate()
        .filter_map(|(k, &m)| m.then_some(k))
        .collect();
    let nf = free.len();
    let mut cols = DMatrix::zeros(d * r, nf);
    for (c, &k) in free.iter().enumerate() {
        let mut e = DMatrix::zeros(d, r);
        e[k] = 1.0;
        cols.set_column(c, &DVector::from_column_slice(tangent_component(x, &e).as_slice()));
    }
    let base_vec = DVector::from_column_slice(base.as_slice());
    let q = cols.transpose() * &cols;
    let b = cols.transpose() * &base_vec;
    let lip = q.clone().symmetric_eigenvalues().max();
    if !(lip > 1e-14) {
        return KktValue {
            value: base.norm(),
            inner_iterations: 0,
            converged: true,
        };
    }

    let project = |z: &DVector<f64>| -> DVector<f64> {
        let mut g = sub.fixed_part.clone();
        for (c, &k) in free.iter().enumerate() {
            g[k] = z[c];
        }
        let g = sub.project(&g);
        DVector::from_iterator(nf, free.iter().map(|&k| g[k]))
    };

    let mut z = DVector::zeros(nf);
    let mut converged = false;
    let mut iters = 0;
    while iters < KKT_INNER_MAX_ITERS {
        iters += 1;
        let grad_z = &b + &q * &z;
        let next = project(&(&z - grad_z / lip));
        let mapping = (&z - &next).norm() * lip;
        z = next;
        if mapping <= KKT_INNER_TOL {
            converged = true;
            break;
        }
    }
    let value = (base_vec + cols * z).norm();
    KktValue {
        value,
        inner_iterations: iters,
        converged,
    }
}

/// `‖P_T_x(∇f(x))‖`, the Riemannian gradient norm of the smooth part.
pub fn riemannian_gradient_norm(inst: &ProblemInstance, x: &StiefelPoint) -> f64 {
    tangent_component(x, &inst.global_gradient(x.as_matrix())).norm()
}

/// Distance from zero to `∇f(x) + ∂r(x)` without a manifold (Euclidean problems).
pub fn euclidean_kkt(inst: &ProblemInstance, x: &AmbientMatrix, zero_tol: f64) -> f64 {
    let grad = inst.global_gradient(x);
    let sub = inst.regularizer().subdifferential_at(x, zero_tol);
    // The constraint set is a product of intervals/balls, so the nearest
    // subgradient to −∇f is a plain projection.
    (&grad + sub.project(&-&grad)).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsStationarity {
    pub stationary: bool,
    /// `max_i ‖x_i − x̄‖`
    pub max_distance: f64,
    /// `max_i dist(0, P_T(∇f(x_i) + ∂r(x_i)))`
    pub max_kkt: f64,
}

/// Whether the iterates are jointly `ε`-consensual and `ε`-stationary.
pub fn eps_stationarity(inst: &ProblemInstance, xs: &[StiefelPoint], eps: f64, zero_tol: f64) -> Result<EpsStationarity> {
    let xbar = manifold_mean(xs)?;
    let max_distance = xs
        .iter()
        .map(|x| (x.as_matrix() - xbar.as_matrix()).norm())
        .fold(0.0, f64::max);
    let max_kkt = xs
        .iter()
        .map(|x| kkt_violation(inst, x, zero_tol).value)
        .fold(0.0, f64::max);
    Ok(EpsStationarity {
        stationary: max_distance <= eps && max_kkt <= eps,
        max_distance,
        max_kkt,
    })
}

/// Composite stationarity measure `max{kkt², consensus, Σ‖η_i‖²}` of a record.
pub fn composite_measure(rec: &TrajectoryRecord) -> Option<f64> {
    let kkt = rec.kkt?;
    let cons = rec.consensus?;
    Some((kkt * kkt).max(cons).max(rec.eta_stacked_sq))
}

pub const MIN_SLOPE_POINTS: usize = 10;

/// Least-squares slope of `log M_K` against `log K` over `K ∈ [k_min, k_max]`,
/// where `M_K` is the running minimum of [`composite_measure`] up to `K`.
pub fn rate_slope(records: &[TrajectoryRecord], k_min: usize, k_max: usize) -> Result<f64> {
    let mut running = f64::INFINITY;
    let mut points = Vec::new();
    for rec in records {
        if let Some(m) = composite_measure(rec) {
            running = running.min(m);
        }
        if rec.k >= k_min.max(1) && rec.k <= k_max && running.is_finite() && running > 0.0 {
            points.push(((rec.k as f64).ln(), running.ln()));
        }
    }
    if points.len() < MIN_SLOPE_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_SLOPE_POINTS,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}
