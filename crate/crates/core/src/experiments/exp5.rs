//! Feature recovery as the sample size and the ambient dimension vary, for
//! BKerNN with the feature penalty, Brownian kernel ridge and a ReLU network.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rise, scale_count, scale_list, ExperimentOutput, Table};
use crate::datagen::{generate, Mechanism, SyntheticSpec};
use crate::error::{Error, Result};
use crate::estimators::{relunn_fit, BkrrModel, ReluNetState};
use crate::metrics::{extract_features, feature_score, mse, r2_score};
use crate::penalties::Penalty;
use crate::rng::derive_seed;
use crate::trainer::{default_lambda, fit, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub k: usize,
    pub n_test: usize,
    pub noise_std: f64,
    pub n_values: Vec<usize>,
    pub d_for_n_sweep: usize,
    pub d_values: Vec<usize>,
    pub n_for_d_sweep: usize,
    pub m: usize,
    pub n_iter: usize,
    pub gamma0: f64,
    pub relu_width: usize,
    pub relu_step_size: f64,
    /// Capped at the training sample size.
    pub relu_batch: usize,
    pub relu_steps: usize,
    pub n_seeds: usize,
}

impl Params {
    pub fn reference() -> Self {
        Params {
            k: 3,
            n_test: 201,
            noise_std: 0.0,
            n_values: vec![10, 20, 50, 100, 150, 200, 300, 400, 500],
            d_for_n_sweep: 15,
            d_values: vec![3, 5, 10, 20, 30, 40, 50],
            n_for_d_sweep: 212,
            m: 50,
            n_iter: 20,
            gamma0: 500.0,
            relu_width: 50,
            relu_step_size: 0.05,
            relu_batch: 16,
            relu_steps: 1500,
            n_seeds: 10,
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.n_values = scale_list(&self.n_values, s, 10);
        self.d_values = scale_list(&self.d_values, s, self.k);
        self.d_for_n_sweep = scale_count(self.d_for_n_sweep, s, self.k);
        self.n_for_d_sweep = scale_count(self.n_for_d_sweep, s, 10);
        self.n_test = scale_count(self.n_test, s, 20);
        self.m = scale_count(self.m, s, 5);
        self
    }

    /// `(sweep code, n, d)` of every setting.
    pub fn settings(&self) -> Vec<(u8, usize, usize)> {
        let a = self.n_values.iter().map(|&n| (0, n, self.d_for_n_sweep));
        let b = self.d_values.iter().map(|&d| (1, self.n_for_d_sweep, d));
        a.chain(b).collect()
    }
}

pub const METHODS: [&str; 3] = ["bkernn", "bkrr", "relu"];

fn run_one(p: &Params, sweep: u8, n: usize, d: usize, method: usize, rep: usize, seed: u64) -> Result<Vec<f64>> {
    // Data depend on (n, d, repetition) only, so all methods see the same sample.
    let data_seed = derive_seed(derive_seed(derive_seed(seed, rep as u64), n as u64), d as u64);
    let g = generate(&SyntheticSpec {
        n_train: n,
        n_test: p.n_test,
        d,
        k: p.k,
        noise_std: p.noise_std,
        mechanism: Mechanism::Exp5AbsSin,
        seed: data_seed,
    })?;
    let (x, y) = (&g.train.x, &g.train.y);
    let truth = g
        .p_true
        .as_ref()
        .ok_or_else(|| Error::Data("rotated target without ground truth".into()))?;
    let (pred, score, rise_value) = match method {
        0 => {
            let cfg = TrainConfig::new(p.m, default_lambda(x))
                .with_penalty(Penalty::Feature)
                .with_gamma0(p.gamma0)
                .with_iterations(p.n_iter)
                .with_seed(derive_seed(data_seed, 10));
            let (model, report) = fit(x, y, &cfg)?;
            let est = extract_features(&model.particles, p.k, &Penalty::Feature)?;
            (
                model.predict(&g.test.x)?,
                feature_score(truth, &est.basis, d, p.k)?,
                rise(&report),
            )
        }
        1 => {
            let model = BkrrModel::fit(x, y, default_lambda(x))?;
            (model.predict(&g.test.x)?, f64::NAN, f64::NAN)
        }
        _ => {
            let stream = derive_seed(data_seed, 20);
            let batch = p.relu_batch.min(n);
            let s0 = ReluNetState::init(d, p.relu_width, p.relu_step_size, batch, p.relu_steps, derive_seed(stream, 0))?;
            let net = relunn_fit(x, y, &s0, derive_seed(stream, 1))?;
            let est = extract_features(&net.hidden_weights.transpose(), p.k, &Penalty::Basic)?;
            (
                net.predict(&g.test.x)?,
                feature_score(truth, &est.basis, d, p.k)?,
                f64::NAN,
            )
        }
    };
    Ok(vec![
        rep as f64,
        sweep as f64,
        n as f64,
        d as f64,
        method as f64,
        mse(&g.test.y, &pred)?,
        r2_score(&g.test.y, &pred)?,
        score,
        rise_value,
    ])
}

pub fn run(p: &Params, seed: u64) -> Result<ExperimentOutput> {
    let mut tasks = Vec::new();
    for (sweep, n, d) in p.settings() {
        for method in 0..METHODS.len() {
            for rep in 0..p.n_seeds {
                tasks.push((sweep, n, d, method, rep));
            }
        }
    }
    let rows = tasks
        .par_iter()
        .map(|&(sweep, n, d, method, rep)| run_one(p, sweep, n, d, method, rep, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(
        "results",
        &[
            "seed",
            "sweep",
            "n",
            "d",
            "method",
            "test_mse",
            "test_r2",
            "feature_score",
            "max_objective_rise",
        ],
    );
    t.rows = rows;
    Ok(ExperimentOutput {
        tables: vec![t],
        legends: vec![
            ("sweep".into(), "0 sample size, 1 dimension".into()),
            ("method".into(), "0 bkernn, 1 bkrr, 2 relu network".into()),
            ("feature_score".into(), "NaN for bkrr, which learns no features".into()),
        ],
    })
}
