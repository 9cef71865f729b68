//! Effect of each particle penalty on the learned particles: which rows
//! (variables) and how many singular directions (features) survive.

use bkernn::datagen::{generate, Mechanism, SyntheticSpec};
use bkernn::metrics::{extract_features, feature_score, r2_score};
use bkernn::trainer::default_lambda;
use bkernn::{fit, Penalty, TrainConfig};
use nalgebra::SVD;

fn main() -> bkernn::Result<()> {
    let (d, k) = (12, 3);
    let data = generate(&SyntheticSpec {
        n_train: 250,
        n_test: 500,
        d,
        k,
        noise_std: 0.2,
        mechanism: Mechanism::Exp3Variables,
        seed: 3,
    })?;
    let truth = data.p_true.clone().expect("variable mechanism has ground truth");
    let lambda = default_lambda(&data.train.x);
    println!("{:<22} {:>8} {:>10} {:>9} {:>8}", "penalty", "test R²", "zero rows", "rank", "score");
    for penalty in [
        Penalty::Basic,
        Penalty::Variable,
        Penalty::Feature,
        Penalty::ConcaveVariable { s: 1.0 },
        Penalty::ConcaveFeature { s: 1.0 },
    ] {
        let cfg = TrainConfig::new(20, lambda).with_penalty(penalty).with_iterations(30);
        let (model, _) = fit(&data.train.x, &data.train.y, &cfg)?;
        let w = &model.particles;
        let zero_rows = w.row_iter().filter(|r| r.norm() == 0.0).count();
        let sv = SVD::new(w.clone(), false, false).singular_values;
        let rank = sv.iter().filter(|s| **s > 1e-8 * sv.max()).count();
        let est = extract_features(w, k, &penalty)?;
        println!(
            "{:<22} {:>8.4} {:>10} {:>9} {:>8.3}",
            penalty.to_string(),
            r2_score(&data.test.y, &model.predict(&data.test.x)?)?,
            zero_rows,
            rank,
            feature_score(&truth, &est.basis, d, k)?
        );
    }
    Ok(())
}
