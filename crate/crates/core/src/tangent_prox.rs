//! Tangent-space proximal subproblem
//!
//! ```text
//! η* = argmin_{η ∈ T_y M}  ‖η‖²/(2τ) + r(y + η)
//! ```
//!
//! With a symmetric multiplier `Λ` for the constraint `yᵀη + ηᵀy = 0`, the
//! Lagrangian is minimized in closed form by
//!
//! ```text
//! η(Λ) = prox_{τr}(y − 2τ·yΛ) − y
//! ```
//!
//! and the dual residual `E(Λ) = yᵀη(Λ) + η(Λ)ᵀy` is the gradient of the
//! concave dual function. We drive `E(Λ) → 0` with a regularized semismooth
//! Newton method over the `r(r+1)/2` free entries of `Λ`, falling back to dual
//! ascent `Λ ← Λ + E(Λ)/(4τ)` when Newton stalls.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regularizer::RegularizerSpec;
use crate::stiefel::{tangent_component, AmbientMatrix, StiefelPoint, TangentVector};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_NEWTON_ITERS: usize = 100;
pub const MAX_FIXED_POINT_ITERS: usize = 10_000;
/// Slack added to the `2τL_r` step bound before it counts as violated.
pub const STEP_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    SemismoothNewton,
    FixedPoint,
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub eta: TangentVector,
    /// `‖E(Λ)‖_F` at the returned multiplier.
    pub kkt_residual: f64,
    pub inner_iterations: usize,
    pub method_used: SolveMethod,
    /// Final multiplier, reusable as a warm start.
    pub multiplier: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubproblemSolver {
    pub tol: f64,
    pub max_newton_iters: usize,
    pub max_fixed_point_iters: usize,
}

impl Default for SubproblemSolver {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_newton_iters: MAX_NEWTON_ITERS,
            max_fixed_point_iters: MAX_FIXED_POINT_ITERS,
        }
    }
}

/// Solves the subproblem from `Λ = 0` with the default iteration caps.
pub fn solve_subproblem(y: &StiefelPoint, reg: &RegularizerSpec, tau: f64, tol: f64) -> Result<SubproblemResult> {
    SubproblemSolver {
        tol,
        ..Default::default()
    }
    .solve(y, reg, tau, None)
}

/// `η(Λ)` and the symmetric residual `E(Λ)`.
pub fn dual_residual(
    y: &StiefelPoint,
    reg: &RegularizerSpec,
    tau: f64,
    multiplier: &DMatrix<f64>,
) -> (AmbientMatrix, DMatrix<f64>) {
    let (eta, _) = eta_of(y, reg, tau, multiplier);
    let e = constraint_residual(y, &eta);
    (eta, e)
}

fn eta_of(
    y: &StiefelPoint,
    reg: &RegularizerSpec,
    tau: f64,
    multiplier: &DMatrix<f64>,
) -> (AmbientMatrix, AmbientMatrix) {
    let y = y.as_matrix();
    let v = y - (y * multiplier) * (2.0 * tau);
    let eta = reg.euclidean_prox(&v, tau) - y;
    (eta, v)
}

fn constraint_residual(y: &StiefelPoint, eta: &AmbientMatrix) -> DMatrix<f64> {
    let yte = y.as_matrix().transpose() * eta;
    // Symmetric by construction; average explicitly so it holds bitwise.
    let e = &yte + yte.transpose();
    (&e + e.transpose()) * 0.5
}

/// Index pairs `(a, b)`, `a <= b`, parameterizing a symmetric `r×r` matrix.
fn sym_pairs(r: usize) -> Vec<(usize, usize)> {
    (0..r).flat_map(|a| (a..r).map(move |b| (a, b))).collect()
}

fn sym_basis(r: usize, (a, b): (usize, usize)) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(r, r);
    m[(a, b)] = 1.0;
    m[(b, a)] = 1.0;
    m
}

fn upper_vec(m: &DMatrix<f64>, pairs: &[(usize, usize)]) -> DVector<f64> {
    DVector::from_iterator(pairs.len(), pairs.iter().map(|&p| m[p]))
}

fn from_coeffs(r: usize, coeffs: &DVector<f64>, pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(r, r);
    for (&(a, b), &c) in pairs.iter().zip(coeffs.iter()) {
        m[(a, b)] = c;
        m[(b, a)] = c;
    }
    m
}

impl SubproblemSolver {
    pub fn solve(
        &self,
        y: &StiefelPoint,
        reg: &RegularizerSpec,
        tau: f64,
        warm_start: Option<&DMatrix<f64>>,
    ) -> Result<SubproblemResult> {
        if !(tau > 0.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "subproblem needs tau > 0 and tol > 0 (tau={tau}, tol={})",
                self.tol
            )));
        }
        let (_, r) = y.dims();
        if reg.is_zero() {
            return Ok(SubproblemResult {
                eta: TangentVector::zero(y.clone()),
                kkt_residual: 0.0,
                inner_iterations: 0,
                method_used: SolveMethod::SemismoothNewton,
                multiplier: DMatrix::zeros(r, r),
            });
        }

        let start = warm_start.cloned().unwrap_or_else(|| DMatrix::zeros(r, r));
        let newton = self.newton(y, reg, tau, start);
        let (multiplier, residual, iterations, method) = match newton {
            (lam, res, it) if res <= self.tol => (lam, res, it, SolveMethod::SemismoothNewton),
            (lam, _, newton_iters) => {
                let (lam, res, it) = self.fixed_point(y, reg, tau, lam);
                if !(res <= self.tol) {
                    return Err(Error::NoConvergence {
                        residual: res,
                        tol: self.tol,
                        newton: newton_iters,
                        fixed_point: it,
                    });
                }
                (lam, res, newton_iters + it, SolveMethod::FixedPoint)
            }
        };

        let (eta_raw, _) = eta_of(y, reg, tau, &multiplier);
        // Remove the O(tol) normal component so the result is tangent to rounding.
        let eta = tangent_component(y, &eta_raw);
        let eta = TangentVector::new(y.clone(), eta)?;

        let bound = 2.0 * tau * reg.lipschitz_constant(y.dims().0, r);
        if eta.norm() > bound + STEP_BOUND_SLACK {
            return Err(Error::StepBoundViolation {
                norm: eta.norm(),
                bound,
            });
        }
        check_descent(y, reg, tau, eta.as_matrix())?;

        Ok(SubproblemResult {
            eta,
            kkt_residual: residual,
            inner_iterations: iterations,
            method_used: method,
            multiplier,
        })
    }

    fn newton(
        &self,
        y: &StiefelPoint,
        reg: &RegularizerSpec,
        tau: f64,
        mut lam: DMatrix<f64>,
    ) -> (DMatrix<f64>, f64, usize) {
        let (_, r) = y.dims();
        let ym = y.as_matrix();
        let pairs = sym_pairs(r);
        let p = pairs.len();

        let (eta, mut v) = eta_of(y, reg, tau, &lam);
        let mut e = constraint_residual(y, &eta);
        let mut res = e.norm();

        for iter in 0..self.max_newton_iters {
            if res <= self.tol {
                return (lam, res, iter);
            }
            // Column c holds dE[B_c] = yᵀD(−2τ y B_c) + (·)ᵀy.
            let mut jac = DMatrix::zeros(p, p);
            for (c, &pair) in pairs.iter().enumerate() {
                let h = (ym * sym_basis(r, pair)) * (-2.0 * tau);
                let dz = reg.prox_derivative_apply(&v, tau, &h);
                let de = constraint_residual(y, &dz);
                jac.set_column(c, &upper_vec(&de, &pairs));
            }
            // -J is positive semidefinite with norm at most 4τ; shift it by a
            // residual-proportional amount to keep the system solvable.
            let mu = 4.0 * tau * res.min(0.1);
            let mut lhs = -jac;
            for k in 0..p {
                lhs[(k, k)] += mu;
            }
            let rhs = upper_vec(&e, &pairs);
            let Some(step) = lhs.lu().solve(&rhs) else {
                return (lam, res, iter);
            };
            let direction = from_coeffs(r, &step, &pairs);

            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = &lam + &direction * t;
                let (eta_t, v_t) = eta_of(y, reg, tau, &trial);
                let e_t = constraint_residual(y, &eta_t);
                let res_t = e_t.norm();
                if res_t <= (1.0 - 1e-4 * t) * res {
                    lam = trial;
                    v = v_t;
                    e = e_t;
                    res = res_t;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return (lam, res, iter + 1);
            }
        }
        (lam, res, self.max_newton_iters)
    }

    fn fixed_point(
        &self,
        y: &StiefelPoint,
        reg: &RegularizerSpec,
        tau: f64,
        mut lam: DMatrix<f64>,
    ) -> (DMatrix<f64>, f64, usize) {
        let beta = 1.0 / (4.0 * tau);
        let (_, mut e) = dual_residual(y, reg, tau, &lam);
        let mut res = e.norm();
        for iter in 0..self.max_fixed_point_iters {
            if res <= self.tol {
                return (lam, res, iter);
            }
            lam += &e * beta;
            e = dual_residual(y, reg, tau, &lam).1;
            res = e.norm();
        }
        (lam, res, self.max_fixed_point_iters)
    }
}

/// `g(η) = ‖η‖²/(2τ) + r(y + η)`.
pub fn subproblem_objective(y: &StiefelPoint, reg: &RegularizerSpec, tau: f64, eta: &AmbientMatrix) -> f64 {
    eta.norm_squared() / (2.0 * tau) + reg.value(&(y.as_matrix() + eta))
}

/// Strong-convexity descent `g(0) − g(η) ≥ ‖η‖²/(2τ)`, with a small relative slack.
fn check_descent(y: &StiefelPoint, reg: &RegularizerSpec, tau: f64, eta: &AmbientMatrix) -> Result<()> {
    let g0 = reg.value(y.as_matrix());
    let decrease = g0 - subproblem_objective(y, reg, tau, eta);
    let required = eta.norm_squared() / (2.0 * tau);
    let slack = 1e-9 * (1.0 + g0.abs()) + 1e-7 * required;
    if decrease + slack < required {
        return Err(Error::DescentViolation { decrease, required });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stiefel::{project_to_manifold, tangency_residual};
    use nalgebra::dmatrix;

    fn point() -> StiefelPoint {
        project_to_manifold(&dmatrix![0.9, 0.1; -0.2, 0.8; 0.3, -0.4; 0.05, 0.2]).unwrap()
    }

    #[test]
    fn zero_regularizer_gives_zero_step() {
        let res = solve_subproblem(&point(), &RegularizerSpec::zero(), 0.1, 1e-10).unwrap();
        assert_eq!(res.eta.norm(), 0.0);
        assert_eq!(res.kkt_residual, 0.0);
    }

    #[test]
    fn dual_residual_at_zero_multiplier() {
        let y = point();
        let (eta, e) = dual_residual(&y, &RegularizerSpec::zero(), 0.1, &DMatrix::zeros(2, 2));
        assert_eq!(eta.norm(), 0.0);
        assert_eq!(e.norm(), 0.0);

        let l1 = RegularizerSpec::l1(0.5).unwrap();
        let (eta, e) = dual_residual(&y, &l1, 0.1, &DMatrix::zeros(2, 2));
        let expected = l1.euclidean_prox(y.as_matrix(), 0.1) - y.as_matrix();
        assert!((&eta - &expected).amax() < 1e-15);
        let direct = y.as_matrix().transpose() * &eta + eta.transpose() * y.as_matrix();
        assert!((&e - direct).amax() < 1e-15);
    }

    #[test]
    fn residual_matrix_is_symmetric() {
        let y = point();
        let l21 = RegularizerSpec::l21(0.7).unwrap();
        let lam = dmatrix![0.3, -0.1; -0.1, 2.0];
        let (_, e) = dual_residual(&y, &l21, 0.2, &lam);
        assert!((&e - e.transpose()).amax() < 1e-14);
    }

    #[test]
    fn l1_solution_is_tangent_and_bounded() {
        let y = point();
        let l1 = RegularizerSpec::l1(0.4).unwrap();
        let res = solve_subproblem(&y, &l1, 0.1, 1e-10).unwrap();
        assert!(res.kkt_residual <= 1e-10);
        assert!(tangency_residual(&y, res.eta.as_matrix()) < 1e-12);
        assert!(res.eta.norm() <= 2.0 * 0.1 * l1.lipschitz_constant(4, 2));
        assert!(res.eta.norm() > 0.0);
    }

    #[test]
    fn fixed_point_fallback_converges() {
        let y = point();
        let l21 = RegularizerSpec::l21(0.3).unwrap();
        let solver = SubproblemSolver {
            max_newton_iters: 0,
            ..Default::default()
        };
        let slow = solver.solve(&y, &l21, 0.1, None).unwrap();
        assert_eq!(slow.method_used, SolveMethod::FixedPoint);
        let fast = SubproblemSolver::default().solve(&y, &l21, 0.1, None).unwrap();
        assert_eq!(fast.method_used, SolveMethod::SemismoothNewton);
        assert!((slow.eta.as_matrix() - fast.eta.as_matrix()).norm() < 1e-8);
    }

    #[test]
    fn exhausted_iterations_report_no_convergence() {
        let solver = SubproblemSolver {
            tol: 1e-14,
            max_newton_iters: 0,
            max_fixed_point_iters: 1,
        };
        let err = solver
            .solve(&point(), &RegularizerSpec::l1(0.5).unwrap(), 0.2, None)
            .unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(solve_subproblem(&point(), &RegularizerSpec::zero(), 0.0, 1e-10).is_err());
        assert!(solve_subproblem(&point(), &RegularizerSpec::zero(), 0.1, 0.0).is_err());
    }
}
