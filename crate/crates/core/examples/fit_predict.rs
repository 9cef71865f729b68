//! Fit BKerNN on a rotated multi-index target and score it on held-out data.

use bkernn::datagen::{generate, Mechanism, SyntheticSpec};
use bkernn::metrics::r2_score;
use bkernn::trainer::default_lambda;
use bkernn::{fit, Penalty, TrainConfig};

fn main() -> bkernn::Result<()> {
    let data = generate(&SyntheticSpec {
        n_train: 300,
        n_test: 500,
        d: 10,
        k: 2,
        noise_std: 0.1,
        mechanism: Mechanism::Exp3Features,
        seed: 1,
    })?;
    let lambda = default_lambda(&data.train.x);
    let cfg = TrainConfig::new(20, lambda)
        .with_penalty(Penalty::Feature)
        .with_iterations(30)
        .with_seed(7);
    let (model, report) = fit(&data.train.x, &data.train.y, &cfg)?;

    println!("lambda           {lambda:.5}");
    println!("objective start  {:.5}", report.objective_trace[0]);
    println!("objective end    {:.5}", report.objective_trace.last().unwrap());
    println!("train R²         {:.4}", r2_score(&data.train.y, &model.fitted()?)?);
    println!("test R²          {:.4}", r2_score(&data.test.y, &model.predict(&data.test.x)?)?);
    Ok(())
}
