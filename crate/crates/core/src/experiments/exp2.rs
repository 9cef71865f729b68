//! Sensitivity to the number of particles and to λ on an axis-aligned target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rise, scale_count, scale_list, ExperimentOutput, Table};
use crate::datagen::{generate, Mechanism, SyntheticSpec};
use crate::error::{Error, Result};
use crate::metrics::{extract_features, feature_score, mse, r2_score};
use crate::penalties::Penalty;
use crate::rng::derive_seed;
use crate::trainer::{fit, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub k: usize,
    pub noise_std: f64,
    pub gamma0: f64,
    pub n_iter: usize,
    /// Particle counts of the first sweep, run at `lambda_for_m_sweep`.
    pub m_values: Vec<usize>,
    pub lambda_for_m_sweep: f64,
    /// λ values of the second sweep, run with `m_for_lambda_sweep` particles.
    pub lambda_values: Vec<f64>,
    pub m_for_lambda_sweep: usize,
    pub n_seeds: usize,
}

impl Params {
    pub fn reference() -> Self {
        Params {
            n_train: 412,
            n_test: 1024,
            d: 20,
            k: 5,
            noise_std: 0.1,
            gamma0: 500.0,
            n_iter: 50,
            m_values: vec![1, 3, 5, 7, 10, 15, 20, 30, 40, 50],
            lambda_for_m_sweep: 0.02,
            lambda_values: vec![0.0005, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.3, 0.5],
            m_for_lambda_sweep: 10,
            n_seeds: 1,
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.n_train = scale_count(self.n_train, s, 20);
        self.n_test = scale_count(self.n_test, s, 20);
        self.d = scale_count(self.d, s, self.k);
        self.n_iter = scale_count(self.n_iter, s, 5);
        self.m_values = scale_list(&self.m_values, s, 1);
        self
    }
}

/// `(sweep code, m, λ)` of every setting, sweeps in order.
fn settings(p: &Params) -> Vec<(u8, usize, f64)> {
    let a = p.m_values.iter().map(|&m| (0, m, p.lambda_for_m_sweep));
    let b = p.lambda_values.iter().map(|&l| (1, p.m_for_lambda_sweep, l));
    a.chain(b).collect()
}

pub fn run(p: &Params, seed: u64) -> Result<ExperimentOutput> {
    let tasks: Vec<((u8, usize, f64), usize)> = settings(p)
        .into_iter()
        .flat_map(|s| (0..p.n_seeds).map(move |r| (s, r)))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&((sweep, m, lambda), rep)| {
            let data_seed = derive_seed(seed, rep as u64);
            let data = generate(&SyntheticSpec {
                n_train: p.n_train,
                n_test: p.n_test,
                d: p.d,
                k: p.k,
                noise_std: p.noise_std,
                mechanism: Mechanism::Exp2AbsCoords,
                seed: data_seed,
            })?;
            let cfg = TrainConfig::new(m, lambda)
                .with_penalty(Penalty::Basic)
                .with_gamma0(p.gamma0)
                .with_iterations(p.n_iter)
                .with_seed(derive_seed(data_seed, 10));
            let (model, report) = fit(&data.train.x, &data.train.y, &cfg)?;
            let fitted = model.fitted()?;
            let pred = model.predict(&data.test.x)?;
            let truth = data
                .p_true
                .as_ref()
                .ok_or_else(|| Error::Data("axis-aligned target without ground truth".into()))?;
            // With m < k the extracted span is padded up to k directions.
            let est = extract_features(&model.particles, p.k, &Penalty::Basic)?;
            let score = feature_score(truth, &est.basis, p.d, p.k)?;
            Ok(vec![
                rep as f64,
                sweep as f64,
                m as f64,
                lambda,
                mse(&data.train.y, &fitted)?,
                mse(&data.test.y, &pred)?,
                r2_score(&data.train.y, &fitted)?,
                r2_score(&data.test.y, &pred)?,
                score,
                rise(&report),
            ])
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut t = Table::new(
        "results",
        &[
            "seed",
            "sweep",
            "m",
            "lambda",
            "train_mse",
            "test_mse",
            "train_r2",
            "test_r2",
            "feature_score",
            "max_objective_rise",
        ],
    );
    t.rows = rows;
    Ok(ExperimentOutput {
        tables: vec![t],
        legends: vec![("sweep".into(), "0 particle count, 1 regularization".into())],
    })
}
