//! Tabular workflow: write a CSV, load it, standardize with training
//! statistics, fit, save the model file, reload it and predict.

use bkernn::datagen::{generate, load_csv, standardize, write_csv, Mechanism, SyntheticSpec};
use bkernn::metrics::r2_score;
use bkernn::trainer::default_lambda;
use bkernn::{fit, ModelState, Penalty, TrainConfig};

fn main() -> bkernn::Result<()> {
    let dir = std::env::temp_dir().join("bkernn_csv_workflow");
    std::fs::create_dir_all(&dir)?;
    let raw = generate(&SyntheticSpec {
        n_train: 200,
        n_test: 100,
        d: 6,
        k: 2,
        noise_std: 0.2,
        mechanism: Mechanism::Exp3Variables,
        seed: 8,
    })?;
    write_csv(dir.join("train.csv"), &raw.train)?;
    write_csv(dir.join("test.csv"), &raw.test)?;

    let train = load_csv(dir.join("train.csv"), "y")?;
    let test = load_csv(dir.join("test.csv"), "y")?;
    let (train, others, scaling) = standardize(&train, &[test])?;
    let test = &others[0];
    println!("columns {:?}, means {:?}", train.feature_names, scaling.means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>());

    let cfg = TrainConfig::new(12, default_lambda(&train.x)).with_penalty(Penalty::ConcaveVariable { s: 1.0 });
    let (model, _) = fit(&train.x, &train.y, &cfg)?;
    let path = dir.join("model.json");
    model.save(&path)?;
    let reloaded = ModelState::load(&path)?;
    let pred = reloaded.predict(&test.x)?;
    assert_eq!(pred, model.predict(&test.x)?);
    println!("model written to {}, test R² {:.4}", path.display(), r2_score(&test.y, &pred)?);
    Ok(())
}
