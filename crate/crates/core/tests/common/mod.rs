//! Independent reference computations for the integration and acceptance
//! tests. Nothing here calls the library's projection or subproblem code.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Mat = DMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal columns by Gram–Schmidt with sign normalization.
pub fn gram_schmidt(v: &Mat) -> Mat {
    let mut q = v.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for p in 0..j {
                let proj = q.column(p).dot(&q.column(j));
                let qp = q.column(p).clone_owned();
                q.column_mut(j).axpy(-proj, &qp, 1.0);
            }
        }
        let n = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / n);
    }
    q
}

pub fn random_point(d: usize, r: usize, rng: &mut ChaCha8Rng) -> Mat {
    gram_schmidt(&gaussian(d, r, rng))
}

pub fn ortho_residual(x: &Mat) -> f64 {
    (x.transpose() * x - DMatrix::identity(x.ncols(), x.ncols())).norm()
}

/// Polar factor through the symmetric eigendecomposition of `vᵀv`:
/// `v (vᵀv)^{-1/2}`.
pub fn polar_by_eigen(v: &Mat) -> Mat {
    let e = (v.transpose() * v).symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&e.eigenvalues.map(|l| 1.0 / l.sqrt()));
    v * (&e.eigenvectors * inv_sqrt * e.eigenvectors.transpose())
}

/// Nearest point on `St(d,r)` to `v` by Riemannian gradient descent on
/// `½‖y − v‖²` with a Gram–Schmidt retraction, best of `restarts` starts.
pub fn nearest_point_oracle(v: &Mat, restarts: usize, seed: u64) -> Mat {
    let (d, r) = v.shape();
    let mut rng = rng(seed);
    let step = 0.5 / v.norm().max(1.0);
    let mut best: Option<(f64, Mat)> = None;
    for _ in 0..restarts {
        let mut y = random_point(d, r, &mut rng);
        for _ in 0..20_000 {
            let g = -v;
            let sym = {
                let a = y.transpose() * &g;
                (&a + a.transpose()) * 0.5
            };
            let rg = &g - &y * sym;
            if rg.norm() < 1e-14 {
                break;
            }
            y = gram_schmidt(&(&y - rg * step));
        }
        let val = (&y - v).norm();
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, y));
        }
    }
    best.unwrap().1
}

/// Orthonormal basis (as flattened vectors) of the tangent space at `x`,
/// built from `x·Ω` (Ω skew) and `x⊥·K`, then orthonormalized.
pub fn tangent_basis(x: &Mat) -> Vec<Mat> {
    let (d, r) = x.shape();
    let mut raw = Vec::new();
    for a in 0..r {
        for b in (a + 1)..r {
            let mut omega = DMatrix::zeros(r, r);
            omega[(a, b)] = 1.0;
            omega[(b, a)] = -1.0;
            raw.push(x * omega);
        }
    }
    // Complement of span(x): project the identity columns out of x.
    let p = DMatrix::identity(d, d) - x * x.transpose();
    let mut complement: Vec<nalgebra::DVector<f64>> = Vec::new();
    for c in 0..d {
        let mut v = p.column(c).clone_owned();
        for u in &complement {
            let proj = u.dot(&v);
            v.axpy(-proj, u, 1.0);
        }
        let n = v.norm();
        if n > 1e-8 {
            complement.push(v / n);
        }
    }
    for u in &complement {
        for j in 0..r {
            let mut k = DMatrix::zeros(d, r);
            k.column_mut(j).copy_from(u);
            raw.push(k);
        }
    }
    let mut basis: Vec<Mat> = Vec::new();
    for mut m in raw {
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&m);
                m -= b * proj;
            }
        }
        let n = m.norm();
        if n > 1e-10 {
            basis.push(m / n);
        }
    }
    basis
}

pub fn tangent_projection_by_basis(x: &Mat, u: &Mat) -> Mat {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for b in tangent_basis(x) {
        out += &b * b.dot(u);
    }
    out
}

pub fn l1(x: &Mat, lambda: f64) -> f64 {
    lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn l21(x: &Mat, lambda: f64) -> f64 {
    lambda * x.row_iter().map(|r| r.norm()).sum::<f64>()
}

pub fn sign_subgradient(z: &Mat, lambda: f64) -> Mat {
    z.map(|v| if v > 0.0 { lambda } else if v < 0.0 { -lambda } else { 0.0 })
}

pub fn tangent_part(y: &Mat, u: &Mat) -> Mat {
    let a = y.transpose() * u;
    u - y * ((&a + a.transpose()) * 0.5)
}

/// Projected subgradient method for `min_{η ∈ T_y} ‖η‖²/(2τ) + λ‖y+η‖₁`
/// with step `τ/(k+1)` and re-projection onto `T_y` after every step.
pub fn subgradient_subproblem_l1(y: &Mat, lambda: f64, tau: f64, iters: usize) -> Mat {
    let mut eta = DMatrix::zeros(y.nrows(), y.ncols());
    for k in 0..iters {
        let g = &eta / tau + sign_subgradient(&(y + &eta), lambda);
        eta -= g * (tau / (k as f64 + 1.0));
        eta = tangent_part(y, &eta);
    }
    eta
}

/// Soft thresholding.
pub fn soft(v: &Mat, t: f64) -> Mat {
    v.map(|a| a.signum() * (a.abs() - t).max(0.0))
}

/// Centralized proximal gradient for `(1/n)Σ(½⟨x,H_i x⟩ − ⟨q_i,x⟩) + λ‖x‖₁`
/// given the averaged `H` and `q`.
pub fn centralized_prox_grad(h: &Mat, q: &Mat, lambda: f64, iters: usize) -> Mat {
    let l = h.clone().symmetric_eigenvalues().max();
    let t = 1.0 / l;
    let mut x = DMatrix::zeros(q.nrows(), q.ncols());
    for _ in 0..iters {
        let g = h * &x - q;
        x = soft(&(&x - g * t), t * lambda);
    }
    x
}

/// `‖W − J‖₂` from the eigenvalues of the symmetric matrix `W − J`.
pub fn gap_by_eigen(w: &Mat) -> f64 {
    let n = w.nrows();
    let j = DMatrix::from_element(n, n, 1.0 / n as f64);
    (w - j).symmetric_eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()))
}
