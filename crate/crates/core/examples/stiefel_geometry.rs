//! Polar projection, tangent projection and the second-order remainder of
//! the projection on St(10, 5).

use nalgebra::DMatrix;
use prextra::stiefel::{projection_remainder_ratio, orthonormality_residual, tangency_residual};
use prextra::{project_to_manifold, project_to_tangent};

fn main() -> prextra::Result<()> {
    let v = DMatrix::from_fn(10, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + if i == j { 4.0 } else { 0.0 });
    let x = project_to_manifold(&v)?;
    println!("‖xᵀx − I‖ after projection: {:.2e}", orthonormality_residual(x.as_matrix()));

    let u = DMatrix::from_fn(10, 5, |i, j| ((i + 2 * j) as f64).sin());
    let eta = project_to_tangent(&x, &u);
    println!("‖sym(xᵀη)‖ of the tangent part: {:.2e}", tangency_residual(&x, eta.as_matrix()));

    // ‖P(x+u) − x − P_T(u)‖ / ‖u‖² stays bounded as u shrinks.
    let dir = &u / u.norm();
    for scale in [1e-1, 1e-2, 1e-3] {
        println!("|u| = {scale:.0e}: remainder ratio {:.4}", projection_remainder_ratio(&x, &(&dir * scale))?);
    }
    Ok(())
}
