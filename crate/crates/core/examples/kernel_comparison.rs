//! The same training loop with the three scalar kernels. Only the Brownian
//! kernel is positively homogeneous, which keeps particle updates well scaled.

use bkernn::datagen::{generate, Mechanism, SyntheticSpec};
use bkernn::metrics::mse;
use bkernn::trainer::default_lambda;
use bkernn::{fit, ScalarKernel, TrainConfig};

fn main() -> bkernn::Result<()> {
    let data = generate(&SyntheticSpec {
        n_train: 150,
        n_test: 400,
        d: 15,
        k: 3,
        noise_std: 0.5,
        mechanism: Mechanism::Exp1AbsSum,
        seed: 5,
    })?;
    let lambda = 0.5 * default_lambda(&data.train.x);
    for kernel in ScalarKernel::ALL {
        let cfg = TrainConfig::new(30, lambda).with_kernel(kernel).with_iterations(40).with_seed(2);
        let (model, report) = fit(&data.train.x, &data.train.y, &cfg)?;
        println!(
            "{:<12} test MSE {:>8.4}  final objective {:.5}",
            kernel.name(),
            mse(&data.test.y, &model.predict(&data.test.x)?)?,
            report.objective_trace.last().unwrap()
        );
    }
    Ok(())
}
