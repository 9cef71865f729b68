//! Monte-Carlo Gaussian complexity of single Brownian units next to the
//! dimension-dependent bound, for growing sample sizes.

use bkernn::complexity::{dimension_dependent_bound, estimate_gn, ProbeConfig, Sphere};
use bkernn::rng::seeded;
use nalgebra::DMatrix;
use rand::Rng;

fn main() -> bkernn::Result<()> {
    let d = 5;
    println!("{:>6} {:>10} {:>10}", "n", "estimate", "bound");
    for n in [50, 100, 200, 400, 800] {
        let mut rng = seeded(n as u64);
        let x: DMatrix<f64> = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..=1.0));
        let cfg = ProbeConfig {
            n_noise_draws: 100,
            n_direction_draws: 200,
            sphere: Sphere::L2,
            seed: 0,
        };
        println!(
            "{n:>6} {:>10.4} {:>10.4}",
            estimate_gn(&x, &cfg)?,
            dimension_dependent_bound(&x, Sphere::L2)
        );
    }
    Ok(())
}
