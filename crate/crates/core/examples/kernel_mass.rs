//! Mass of the scaled mollifier and of its quadrature rule in dimensions 1 to 3.

use eqmollify::kernel::{normalization_constant, MollifierKernel};

fn main() -> eqmollify::Result<()> {
    for n in 1..=3 {
        println!(
            "n = {n}: lambda = {:.12}",
            normalization_constant(n, 1e-12)?
        );
        for eps in [0.2, 0.1, 0.05] {
            let k = MollifierKernel::new(n, eps, 6)?;
            println!(
                "  eps = {eps:<5} mass = {:.12}  nodes = {}",
                k.mass(),
                k.rule().len()
            );
        }
    }
    Ok(())
}
