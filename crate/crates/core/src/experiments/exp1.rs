//! Kernel comparison: brownian versus exponential and gaussian particle kernels on
//! a rotated single-index target, with λ chosen by cross-validation per kernel.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{code, rise, scale_count, ExperimentOutput, Table};
use crate::datagen::{generate, Mechanism, SyntheticSpec};
use crate::error::Result;
use crate::estimators::cross_validate;
use crate::kernels::{cross_kernel, ScalarKernel};
use crate::metrics::{mse, r2_score};
use crate::penalties::Penalty;
use crate::rng::derive_seed;
use crate::trainer::{default_lambda, fit_observed, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub k: usize,
    pub noise_std: f64,
    pub m: usize,
    pub gamma0: f64,
    pub kernels: Vec<ScalarKernel>,
    /// Grid multipliers of the default λ.
    pub lambda_factors: Vec<f64>,
    pub cv_folds: usize,
    pub cv_iterations: usize,
    pub final_iterations: usize,
    /// Test MSE is recorded every `eval_every` iterations and at the last one.
    pub eval_every: usize,
    pub n_seeds: usize,
}

impl Params {
    pub fn reference() -> Self {
        Params {
            n_train: 214,
            n_test: 1024,
            d: 45,
            k: 5,
            noise_std: 0.5,
            m: 100,
            gamma0: 500.0,
            kernels: ScalarKernel::ALL.to_vec(),
            lambda_factors: vec![0.05, 0.1, 0.5, 1.0, 1.5],
            cv_folds: 5,
            cv_iterations: 20,
            final_iterations: 200,
            eval_every: 10,
            n_seeds: 5,
        }
    }

    /// Shrinks sample sizes, dimension, width and iteration counts.
    pub fn scaled(mut self, s: f64) -> Self {
        self.n_train = scale_count(self.n_train, s, 20);
        self.n_test = scale_count(self.n_test, s, 20);
        self.d = scale_count(self.d, s, self.k);
        self.m = scale_count(self.m, s, 5);
        self.cv_iterations = scale_count(self.cv_iterations, s, 5);
        self.final_iterations = scale_count(self.final_iterations, s, 10);
        self.eval_every = scale_count(self.eval_every, s, 1);
        self
    }
}

struct KernelRun {
    result: Vec<f64>,
    trace: Vec<Vec<f64>>,
}

fn run_one(p: &Params, rep: usize, kernel: ScalarKernel, seed: u64) -> Result<KernelRun> {
    let data_seed = derive_seed(seed, rep as u64);
    let data = generate(&SyntheticSpec {
        n_train: p.n_train,
        n_test: p.n_test,
        d: p.d,
        k: p.k,
        noise_std: p.noise_std,
        mechanism: Mechanism::Exp1AbsSum,
        seed: data_seed,
    })?;
    let (x, y) = (&data.train.x, &data.train.y);
    let (xt, yt) = (&data.test.x, &data.test.y);
    let base = default_lambda(x);
    let grid: Vec<f64> = p.lambda_factors.iter().map(|f| f * base).collect();
    // The same initial particles for every kernel and fold.
    let cfg = TrainConfig::new(p.m, base)
        .with_kernel(kernel)
        .with_penalty(Penalty::Basic)
        .with_gamma0(p.gamma0)
        .with_seed(derive_seed(data_seed, 10));
    let cv = cross_validate(x, y, &cfg.with_iterations(p.cv_iterations), &grid, p.cv_folds, derive_seed(data_seed, 11))?;
    let cfg = cfg.with_lambda(cv.best_lambda).with_iterations(p.final_iterations);

    let mut trace = Vec::new();
    let mut failure = None;
    let last = p.final_iterations;
    let (model, report) = fit_observed(x, y, &cfg, None, |snap| {
        let train_mse = mse(y, &snap.fitted).unwrap_or(f64::NAN);
        let test_mse = if snap.iteration % p.eval_every == 0 || snap.iteration == last {
            match test_predictions(x, xt, snap.particles, snap.alpha, snap.intercept, kernel) {
                Ok(pred) => mse(yt, &pred).unwrap_or(f64::NAN),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        } else {
            f64::NAN
        };
        trace.push(vec![
            rep as f64,
            code(kernel.code()),
            snap.iteration as f64,
            snap.objective,
            train_mse,
            test_mse,
        ]);
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let pred = model.predict(xt)?;
    let fitted = model.fitted()?;
    Ok(KernelRun {
        result: vec![
            rep as f64,
            code(kernel.code()),
            cv.best_lambda,
            mse(y, &fitted)?,
            mse(yt, &pred)?,
            r2_score(yt, &pred)?,
            rise(&report),
            report.stalled_iterations.len() as f64,
        ],
        trace,
    })
}

fn test_predictions(
    x: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    w: &DMatrix<f64>,
    alpha: &DVector<f64>,
    c: f64,
    kernel: ScalarKernel,
) -> Result<DVector<f64>> {
    Ok(cross_kernel(x, xt, w, kernel)? * alpha + DVector::from_element(xt.nrows(), c))
}

pub fn run(p: &Params, seed: u64) -> Result<ExperimentOutput> {
    let tasks: Vec<(ScalarKernel, usize)> = p
        .kernels
        .iter()
        .flat_map(|&k| (0..p.n_seeds).map(move |r| (k, r)))
        .collect();
    let runs = tasks
        .par_iter()
        .map(|&(kernel, rep)| run_one(p, rep, kernel, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut results = Table::new(
        "results",
        &[
            "seed",
            "kernel",
            "lambda",
            "train_mse",
            "test_mse",
            "test_r2",
            "max_objective_rise",
            "stalled_iterations",
        ],
    );
    let mut trace = Table::new(
        "trace",
        &["seed", "kernel", "iteration", "objective", "train_mse", "test_mse"],
    );
    for r in runs {
        results.rows.push(r.result);
        trace.rows.extend(r.trace);
    }
    Ok(ExperimentOutput {
        tables: vec![results, trace],
        legends: vec![
            ("kernel".into(), kernel_legend()),
            ("test_mse".into(), "trace rows between evaluations hold NaN".into()),
        ],
    })
}

pub(crate) fn kernel_legend() -> String {
    ScalarKernel::ALL
        .iter()
        .map(|k| format!("{} {}", k.code(), k.name()))
        .collect::<Vec<_>>()
        .join(", ")
}
