//! ℓ1 and ℓ2,1 regularizers: values, proximal maps and subdifferential boxes.

use nalgebra::DMatrix;
use prextra::RegularizerSpec;

fn main() -> prextra::Result<()> {
    let x = DMatrix::from_row_slice(3, 2, &[0.5, -0.05, 0.0, 0.2, -1.0, 0.0]);
    for reg in [RegularizerSpec::l1(0.1)?, RegularizerSpec::l21(0.1)?] {
        println!("{:?}", reg.kind);
        println!("  value {:.4}, Lipschitz constant on St(3,2) {:.4}", reg.value(&x), reg.lipschitz_constant(3, 2));
        println!("  prox with t = 1: {}", reg.euclidean_prox(&x, 1.0));
        let sub = reg.subdifferential_at(&x, 1e-12);
        println!("  subdifferential has {} free coordinates", sub.free_count());
    }
    Ok(())
}
