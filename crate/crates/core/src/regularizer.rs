//! Nonsmooth convex regularizers: entrywise `ℓ1`, row-wise `ℓ2,1`, and zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stiefel::AmbientMatrix;

/// Default threshold below which an entry (or row norm) counts as zero when
/// classifying the subdifferential.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizerKind {
    /// `λ Σ |x_ij|`
    L1,
    /// `λ Σ_i ‖row_i(x)‖₂`
    L21,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub lambda: f64,
}

impl RegularizerSpec {
    pub fn new(kind: RegularizerKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "regularization weight must be finite and >= 0, got {lambda}"
            )));
        }
        let lambda = if kind == RegularizerKind::Zero { 0.0 } else { lambda };
        Ok(Self { kind, lambda })
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        Self::new(RegularizerKind::L1, lambda)
    }

    pub fn l21(lambda: f64) -> Result<Self> {
        Self::new(RegularizerKind::L21, lambda)
    }

    pub fn zero() -> Self {
        Self {
            kind: RegularizerKind::Zero,
            lambda: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.kind == RegularizerKind::Zero || self.lambda == 0.0
    }

    pub fn value(&self, x: &AmbientMatrix) -> f64 {
        match self.kind {
            RegularizerKind::L1 => self.lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            RegularizerKind::L21 => self.lambda * row_norms(x).iter().sum::<f64>(),
            RegularizerKind::Zero => 0.0,
        }
    }

    /// `prox_{t·r}(v)`.
    pub fn euclidean_prox(&self, v: &AmbientMatrix, t: f64) -> AmbientMatrix {
        debug_assert!(t > 0.0);
        let thresh = t * self.lambda;
        match self.kind {
            RegularizerKind::L1 => v.map(|a| soft_threshold(a, thresh)),
            RegularizerKind::L21 => {
                let mut out = v.clone();
                for (i, norm) in row_norms(v).into_iter().enumerate() {
                    let scale = if norm > thresh { 1.0 - thresh / norm } else { 0.0 };
                    out.row_mut(i).scale_mut(scale);
                }
                out
            }
            RegularizerKind::Zero => v.clone(),
        }
    }

    /// Frobenius-norm Lipschitz constant `L_r` on `ℝ^{d×r}`.
    pub fn lipschitz_constant(&self, d: usize, r: usize) -> f64 {
        match self.kind {
            RegularizerKind::L1 => self.lambda * ((d * r) as f64).sqrt(),
            RegularizerKind::L21 => self.lambda * (d as f64).sqrt(),
            RegularizerKind::Zero => 0.0,
        }
    }

    pub fn subdifferential_at(&self, x: &AmbientMatrix, zero_tol: f64) -> SubdifferentialBox {
        let (d, r) = x.shape();
        let mut fixed_part = DMatrix::zeros(d, r);
        let mut free_mask = DMatrix::from_element(d, r, false);
        let geometry = match self.kind {
            RegularizerKind::L1 => {
                for (j, col) in x.column_iter().enumerate() {
                    for (i, &a) in col.iter().enumerate() {
                        if a.abs() > zero_tol {
                            fixed_part[(i, j)] = self.lambda * a.signum();
                        } else {
                            free_mask[(i, j)] = true;
                        }
                    }
                }
                BoxGeometry::Entrywise
            }
            RegularizerKind::L21 => {
                for (i, norm) in row_norms(x).into_iter().enumerate() {
                    if norm > zero_tol {
                        for j in 0..r {
                            fixed_part[(i, j)] = self.lambda * x[(i, j)] / norm;
                        }
                    } else {
                        for j in 0..r {
                            free_mask[(i, j)] = true;
                        }
                    }
                }
                BoxGeometry::Rowwise
            }
            RegularizerKind::Zero => BoxGeometry::Entrywise,
        };
        SubdifferentialBox {
            fixed_part,
            free_mask,
            radius: self.lambda,
            geometry,
        }
    }

    /// Clarke generalized derivative of the prox at `v`, applied to `h`.
    ///
    /// At the kinks (`|v| = tλ`, `‖row‖ = tλ`) the zero element is chosen.
    pub fn prox_derivative_apply(&self, v: &AmbientMatrix, t: f64, h: &AmbientMatrix) -> AmbientMatrix {
        let thresh = t * self.lambda;
        match self.kind {
            RegularizerKind::L1 => v.zip_map(h, |a, b| if a.abs() > thresh { b } else { 0.0 }),
            RegularizerKind::L21 => {
                let mut out = DMatrix::zeros(h.nrows(), h.ncols());
                for (i, norm) in row_norms(v).into_iter().enumerate() {
                    if norm <= thresh {
                        continue;
                    }
                    let vr = v.row(i);
                    let hr = h.row(i);
                    let dot = vr.dot(&hr);
                    let a = 1.0 - thresh / norm;
                    let b = thresh / (norm * norm * norm) * dot;
                    out.row_mut(i).copy_from(&(hr * a + vr * b));
                }
                out
            }
            RegularizerKind::Zero => h.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxGeometry {
    /// Free entries range independently over `[-radius, radius]`.
    Entrywise,
    /// Free rows range over the `ℓ2` ball of `radius`.
    Rowwise,
}

/// Description of `∂r(x)`: a fixed part plus free entries (or rows) that range
/// over a box (or ball).
#[derive(Debug, Clone, PartialEq)]
pub struct SubdifferentialBox {
    pub fixed_part: AmbientMatrix,
    pub free_mask: DMatrix<bool>,
    pub radius: f64,
    pub geometry: BoxGeometry,
}

impl SubdifferentialBox {
    pub fn free_count(&self) -> usize {
        self.free_mask.iter().filter(|&&m| m).count()
    }

    pub fn is_singleton(&self) -> bool {
        self.radius == 0.0 || self.free_count() == 0
    }

    /// Euclidean projection of `g` onto the set.
    pub fn project(&self, g: &AmbientMatrix) -> AmbientMatrix {
        let mut out = self.fixed_part.clone();
        match self.geometry {
            BoxGeometry::Entrywise => {
                for (k, &free) in self.free_mask.iter().enumerate() {
                    if free {
                        out[k] = g[k].clamp(-self.radius, self.radius);
                    }
                }
            }
            BoxGeometry::Rowwise => {
                for i in 0..g.nrows() {
                    if !self.free_mask[(i, 0)] {
                        continue;
                    }
                    let row = g.row(i);
                    let norm = row.norm();
                    let scale = if norm > self.radius { self.radius / norm } else { 1.0 };
                    out.row_mut(i).copy_from(&(row * scale));
                }
            }
        }
        out
    }

    /// Whether `g` is a subgradient, up to `tol`.
    pub fn contains(&self, g: &AmbientMatrix, tol: f64) -> bool {
        if g.shape() != self.fixed_part.shape() {
            return false;
        }
        (g - self.project(g)).amax() <= tol
    }
}

fn soft_threshold(a: f64, t: f64) -> f64 {
    if a > t {
        a - t
    } else if a < -t {
        a + t
    } else {
        0.0
    }
}

fn row_norms(x: &AmbientMatrix) -> Vec<f64> {
    x.row_iter().map(|row| row.norm()).collect()
}
