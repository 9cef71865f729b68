//! One-dimensional targets: BKerNN with few particles against narrow ReLU networks.
//! Predictions on the test grid are kept so the fitted curves can be plotted.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rise, scale_count, ExperimentOutput, Table};
use crate::datagen::{generate, Generated, Mechanism, SyntheticSpec};
use crate::error::Result;
use crate::estimators::{cross_validate, relunn_fit, ReluNetState};
use crate::metrics::{mse, r2_score};
use crate::penalties::Penalty;
use crate::rng::derive_seed;
use crate::trainer::{fit, TrainConfig};

pub const TARGETS: [Mechanism; 3] = [Mechanism::Exp4Sine, Mechanism::Exp4Square, Mechanism::Exp4Triangle];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n_train: usize,
    /// Size of the evenly spaced test grid on `[-1, 1]`.
    pub n_test: usize,
    pub noise_std: f64,
    pub particle_counts: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
    pub n_iter: usize,
    pub gamma0: f64,
    pub relu_widths: Vec<usize>,
    pub relu_batch: usize,
    pub relu_steps: usize,
    pub relu_step_size: f64,
    pub n_seeds: usize,
}

impl Params {
    pub fn reference() -> Self {
        Params {
            n_train: 128,
            n_test: 1024,
            noise_std: 0.2,
            particle_counts: vec![1, 5],
            lambda_grid: vec![0.005, 0.01, 0.02, 0.05],
            cv_folds: 5,
            n_iter: 20,
            gamma0: 500.0,
            relu_widths: vec![1, 5, 32],
            relu_batch: 16,
            relu_steps: 400_000,
            relu_step_size: 0.005,
            n_seeds: 1,
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.n_train = scale_count(self.n_train, s, 20);
        self.n_test = scale_count(self.n_test, s, 20);
        self.relu_steps = scale_count(self.relu_steps, s, 100);
        self
    }
}

#[derive(Debug, Clone, Copy)]
enum Method {
    Bkernn(usize),
    Relu(usize),
}

struct Fit {
    result: Vec<f64>,
    predictions: Vec<Vec<f64>>,
}

fn data(p: &Params, target: Mechanism, rep: usize, seed: u64) -> Result<(Generated, u64)> {
    let data_seed = derive_seed(seed, rep as u64);
    let g = generate(&SyntheticSpec {
        n_train: p.n_train,
        n_test: p.n_test,
        d: 1,
        k: 1,
        noise_std: p.noise_std,
        mechanism: target,
        seed: data_seed,
    })?;
    Ok((g, data_seed))
}

fn run_one(p: &Params, tc: usize, method: Method, rep: usize, seed: u64) -> Result<Fit> {
    let (g, data_seed) = data(p, TARGETS[tc], rep, seed)?;
    let (x, y) = (&g.train.x, &g.train.y);
    let (pred, method_code, width, lambda, rise_value) = match method {
        Method::Bkernn(m) => {
            let cfg = TrainConfig::new(m, p.lambda_grid[0])
                .with_penalty(Penalty::Basic)
                .with_gamma0(p.gamma0)
                .with_iterations(p.n_iter)
                .with_seed(derive_seed(data_seed, 10));
            let cv = cross_validate(x, y, &cfg, &p.lambda_grid, p.cv_folds, derive_seed(data_seed, 11))?;
            let (model, report) = fit(x, y, &cfg.with_lambda(cv.best_lambda))?;
            (model.predict(&g.test.x)?, 0.0, m, cv.best_lambda, rise(&report))
        }
        Method::Relu(w) => {
            let stream = derive_seed(derive_seed(data_seed, 20), w as u64);
            let batch = p.relu_batch.min(x.nrows());
            let s0 = ReluNetState::init(1, w, p.relu_step_size, batch, p.relu_steps, derive_seed(stream, 0))?;
            let net = relunn_fit(x, y, &s0, derive_seed(stream, 1))?;
            (net.predict(&g.test.x)?, 1.0, w, f64::NAN, f64::NAN)
        }
    };
    let yt = &g.test.y;
    let head = [rep as f64, tc as f64, method_code, width as f64];
    let predictions = (0..yt.len())
        .map(|i| {
            let mut r = head.to_vec();
            r.extend([g.test.x[(i, 0)], yt[i], pred[i]]);
            r
        })
        .collect();
    let mut result = head.to_vec();
    result.extend([lambda, mse(yt, &pred)?, r2_score(yt, &pred)?, rise_value]);
    Ok(Fit { result, predictions })
}

pub fn run(p: &Params, seed: u64) -> Result<ExperimentOutput> {
    let methods: Vec<Method> = p
        .particle_counts
        .iter()
        .map(|&m| Method::Bkernn(m))
        .chain(p.relu_widths.iter().map(|&w| Method::Relu(w)))
        .collect();
    let mut tasks = Vec::new();
    for tc in 0..TARGETS.len() {
        for &method in &methods {
            for rep in 0..p.n_seeds {
                tasks.push((tc, method, rep));
            }
        }
    }
    let fits = tasks
        .par_iter()
        .map(|&(tc, method, rep)| run_one(p, tc, method, rep, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut results = Table::new(
        "results",
        &["seed", "target", "method", "width", "lambda", "test_mse", "test_r2", "max_objective_rise"],
    );
    let mut predictions = Table::new(
        "predictions",
        &["seed", "target", "method", "width", "x", "y_true", "y_pred"],
    );
    for f in fits {
        results.rows.push(f.result);
        predictions.rows.extend(f.predictions);
    }
    Ok(ExperimentOutput {
        tables: vec![results, predictions],
        legends: vec![
            ("target".into(), "0 sine, 1 square, 2 triangle".into()),
            ("method".into(), "0 bkernn, 1 relu network".into()),
            ("width".into(), "particles for bkernn, hidden neurons for relu".into()),
            ("lambda".into(), "cross-validated for bkernn, NaN for relu".into()),
        ],
    })
}
