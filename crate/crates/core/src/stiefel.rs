//! Geometry of the compact Stiefel manifold `St(d, r) = { x : xᵀx = I_r }`.
//!
//! The manifold is treated as an embedded submanifold of `ℝ^{d×r}` with the
//! Euclidean (Frobenius) metric. Two projections do all the work:
//!
//! ```text
//! P_M(v)      = U Vᵀ              where v = U Σ Vᵀ is a thin SVD
//! P_T_x(u)    = u − x·sym(xᵀu)    sym(A) = (A + Aᵀ)/2
//! ```
//!
//! `P_M` is the Frobenius-nearest point whenever `v` has full column rank.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Unconstrained `d×r` matrix living in the ambient Euclidean space.
pub type AmbientMatrix = DMatrix<f64>;

/// Feasibility tolerance for [`StiefelPoint`].
pub const FEASIBILITY_TOL: f64 = 1e-10;

/// Smallest singular value accepted by [`project_to_manifold`].
pub const RANK_TOL: f64 = 1e-8;

/// A `d×r` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint(AmbientMatrix);

impl StiefelPoint {
    /// Wraps `data` after checking `‖dataᵀdata − I‖_F ≤ FEASIBILITY_TOL`.
    pub fn new(data: AmbientMatrix) -> Result<Self> {
        if data.ncols() > data.nrows() {
            return Err(Error::DimensionMismatch {
                expected: "r <= d".into(),
                got: format!("{}x{}", data.nrows(), data.ncols()),
            });
        }
        let res = orthonormality_residual(&data);
        if !(res <= FEASIBILITY_TOL) {
            return Err(Error::InvalidConfig(format!(
                "matrix is not on the Stiefel manifold (residual {res:e})"
            )));
        }
        Ok(Self(data))
    }

    /// First `r` columns of the `d×d` identity.
    pub fn identity(d: usize, r: usize) -> Self {
        Self(DMatrix::identity(d, r))
    }

    pub fn as_matrix(&self) -> &AmbientMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> AmbientMatrix {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.shape()
    }
}

impl AsRef<AmbientMatrix> for StiefelPoint {
    fn as_ref(&self) -> &AmbientMatrix {
        &self.0
    }
}

impl std::borrow::Borrow<AmbientMatrix> for StiefelPoint {
    fn borrow(&self) -> &AmbientMatrix {
        &self.0
    }
}

/// A tangent vector `η` at `anchor`, i.e. `anchorᵀη + ηᵀanchor = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    data: AmbientMatrix,
    anchor: StiefelPoint,
}

impl TangentVector {
    /// Checks the tangency residual against [`FEASIBILITY_TOL`].
    pub fn new(anchor: StiefelPoint, data: AmbientMatrix) -> Result<Self> {
        if data.shape() != anchor.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{:?}", anchor.dims()),
                got: format!("{:?}", data.shape()),
            });
        }
        let res = tangency_residual(&anchor, &data);
        if !(res <= FEASIBILITY_TOL) {
            return Err(Error::InvalidConfig(format!(
                "matrix is not tangent at the anchor (residual {res:e})"
            )));
        }
        Ok(Self { data, anchor })
    }

    pub fn zero(anchor: StiefelPoint) -> Self {
        let (d, r) = anchor.dims();
        Self {
            data: DMatrix::zeros(d, r),
            anchor,
        }
    }

    pub fn as_matrix(&self) -> &AmbientMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> AmbientMatrix {
        self.data
    }

    pub fn anchor(&self) -> &StiefelPoint {
        &self.anchor
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }
}

/// Minimal interface for a compact matrix submanifold with a computable
/// nearest-point projection. Only [`Stiefel`] implements it.
pub trait Manifold {
    type Point;

    fn project(&self, v: &AmbientMatrix) -> Result<Self::Point>;

    fn project_tangent(&self, x: &Self::Point, u: &AmbientMatrix) -> AmbientMatrix;

    fn residual(&self, v: &AmbientMatrix) -> f64;
}

/// `St(d, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stiefel {
    pub d: usize,
    pub r: usize,
}

impl Stiefel {
    pub fn new(d: usize, r: usize) -> Result<Self> {
        if r == 0 || r > d {
            return Err(Error::InvalidConfig(format!(
                "Stiefel dims need 0 < r <= d, got d={d}, r={r}"
            )));
        }
        Ok(Self { d, r })
    }
}

impl Manifold for Stiefel {
    type Point = StiefelPoint;

    fn project(&self, v: &AmbientMatrix) -> Result<StiefelPoint> {
        if v.shape() != (self.d, self.r) {
            return Err(Error::DimensionMismatch {
                expected: format!("({}, {})", self.d, self.r),
                got: format!("{:?}", v.shape()),
            });
        }
        project_to_manifold(v)
    }

    fn project_tangent(&self, x: &StiefelPoint, u: &AmbientMatrix) -> AmbientMatrix {
        tangent_component(x, u)
    }

    fn residual(&self, v: &AmbientMatrix) -> f64 {
        orthonormality_residual(v)
    }
}

/// Nearest point on `St(d, r)`: the polar factor `U Vᵀ` of the thin SVD.
///
/// Fails with [`Error::RankDeficient`] when `σ_min(v) < RANK_TOL`.
pub fn project_to_manifold(v: &AmbientMatrix) -> Result<StiefelPoint> {
    let (d, r) = v.shape();
    if r > d {
        return Err(Error::DimensionMismatch {
            expected: "r <= d".into(),
            got: format!("{d}x{r}"),
        });
    }
    let svd = v.clone().svd(true, true);
    let sigma_min = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(sigma_min >= RANK_TOL) {
        return Err(Error::RankDeficient { sigma_min });
    }
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    Ok(StiefelPoint(u * v_t))
}

/// `u − x·sym(xᵀu)` as a raw matrix.
pub fn tangent_component(x: &StiefelPoint, u: &AmbientMatrix) -> AmbientMatrix {
    let xtu = x.0.transpose() * u;
    let sym = (&xtu + xtu.transpose()) * 0.5;
    u - &x.0 * sym
}

/// Orthogonal projection of `u` onto the tangent space at `x`.
pub fn project_to_tangent(x: &StiefelPoint, u: &AmbientMatrix) -> TangentVector {
    TangentVector {
        data: tangent_component(x, u),
        anchor: x.clone(),
    }
}

/// `‖vᵀv − I_r‖_F`.
pub fn orthonormality_residual(v: &AmbientMatrix) -> f64 {
    let r = v.ncols();
    (v.transpose() * v - DMatrix::<f64>::identity(r, r)).norm()
}

/// `‖xᵀη + ηᵀx‖_F`.
pub fn tangency_residual(x: &StiefelPoint, eta: &AmbientMatrix) -> f64 {
    let xte = x.0.transpose() * eta;
    (&xte + xte.transpose()).norm()
}

/// Second-order remainder ratio of the projection,
/// `‖P_M(x+u) − x − P_T_x(u)‖ / ‖u‖²`.
///
/// Bounded by a constant for all small `u`; used to check that empirically.
pub fn projection_remainder_ratio(x: &StiefelPoint, u: &AmbientMatrix) -> Result<f64> {
    let nu = u.norm();
    if nu == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let moved = project_to_manifold(&(&x.0 + u))?;
    let remainder = moved.0 - &x.0 - tangent_component(x, u);
    Ok(remainder.norm() / (nu * nu))
}
