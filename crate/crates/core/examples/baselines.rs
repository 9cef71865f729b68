//! BKerNN against the two baselines: Brownian kernel ridge regression, which
//! learns no features, and a one-hidden-layer ReLU network trained by SGD.

use bkernn::datagen::{generate, Mechanism, SyntheticSpec};
use bkernn::estimators::{relunn_fit, BkrrModel, ReluNetState};
use bkernn::metrics::{extract_features, feature_score, r2_score};
use bkernn::trainer::default_lambda;
use bkernn::{fit, Penalty, TrainConfig};

fn main() -> bkernn::Result<()> {
    let (d, k) = (15, 3);
    let data = generate(&SyntheticSpec {
        n_train: 300,
        n_test: 201,
        d,
        k,
        noise_std: 0.0,
        mechanism: Mechanism::Exp5AbsSin,
        seed: 21,
    })?;
    let truth = data.p_true.clone().unwrap();
    let (x, y) = (&data.train.x, &data.train.y);
    let lambda = default_lambda(x);

    let cfg = TrainConfig::new(50, lambda).with_penalty(Penalty::Feature);
    let (model, _) = fit(x, y, &cfg)?;
    let est = extract_features(&model.particles, k, &Penalty::Feature)?;
    println!(
        "bkernn  R² {:.4}  feature score {:.3}",
        r2_score(&data.test.y, &model.predict(&data.test.x)?)?,
        feature_score(&truth, &est.basis, d, k)?
    );

    let bkrr = BkrrModel::fit(x, y, lambda)?;
    println!("bkrr    R² {:.4}", r2_score(&data.test.y, &bkrr.predict(&data.test.x)?)?);

    let s0 = ReluNetState::init(d, 50, 0.05, 16, 1500, 1)?;
    let net = relunn_fit(x, y, &s0, 2)?;
    let est = extract_features(&net.hidden_weights.transpose(), k, &Penalty::Basic)?;
    println!(
        "relu    R² {:.4}  feature score {:.3}",
        r2_score(&data.test.y, &net.predict(&data.test.x)?)?,
        feature_score(&truth, &est.basis, d, k)?
    );
    Ok(())
}
