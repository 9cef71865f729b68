//! Choosing λ by k-fold cross-validation over multiples of the default value.

use bkernn::datagen::{generate, Mechanism, SyntheticSpec};
use bkernn::estimators::cross_validate;
use bkernn::metrics::r2_score;
use bkernn::trainer::default_lambda;
use bkernn::{fit, TrainConfig};

fn main() -> bkernn::Result<()> {
    let data = generate(&SyntheticSpec {
        n_train: 200,
        n_test: 500,
        d: 8,
        k: 2,
        noise_std: 0.3,
        mechanism: Mechanism::Exp3Features,
        seed: 11,
    })?;
    let base = default_lambda(&data.train.x);
    let grid: Vec<f64> = [0.05, 0.1, 0.5, 1.0, 1.5].iter().map(|f| f * base).collect();
    let cfg = TrainConfig::new(15, base).with_iterations(15);
    let cv = cross_validate(&data.train.x, &data.train.y, &cfg, &grid, 5, 0)?;
    for (l, s) in cv.grid.iter().zip(&cv.mean_scores) {
        println!("lambda {l:.5}  mean validation MSE {:.5}", -s);
    }
    let (model, _) = fit(&data.train.x, &data.train.y, &cfg.with_lambda(cv.best_lambda))?;
    println!("selected {:.5}, test R² {:.4}", cv.best_lambda, r2_score(&data.test.y, &model.predict(&data.test.x)?)?);
    Ok(())
}
