use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::mse;
use crate::rng::seeded;
use crate::trainer::{fit, TrainConfig};

/// Cross-validation outcome over a sorted, deduplicated λ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_lambda: f64,
    /// Ascending grid actually evaluated.
    pub grid: Vec<f64>,
    /// Negative validation MSE, indexed `[grid][fold]`.
    pub fold_scores: Vec<Vec<f64>>,
    pub mean_scores: Vec<f64>,
}

/// Validation indices of each fold: contiguous chunks of a seeded permutation.
pub fn kfold_indices(n: usize, k_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k_folds < 2 {
        return Err(Error::param(format!("need at least 2 folds, got {k_folds}")));
    }
    if n / k_folds < 2 {
        return Err(Error::param(format!(
            "{n} samples cannot be split into {k_folds} folds of at least 2 points"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded(seed));
    Ok((0..k_folds)
        .map(|f| perm[f * n / k_folds..(f + 1) * n / k_folds].to_vec())
        .collect())
}

fn normalize_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::param("empty lambda grid"));
    }
    if let Some(bad) = grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::param(format!("grid values must be positive, got {bad}")));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// Grid search with an arbitrary `fit_predict(x_train, y_train, x_val, λ)`.
/// The best λ maximizes the mean negative MSE; ties go to the larger λ.
pub fn cross_validate_with<F>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda_grid: &[f64],
    k_folds: usize,
    seed: u64,
    fit_predict: F,
) -> Result<CvResult>
where
    F: Fn(&DMatrix<f64>, &DVector<f64>, &DMatrix<f64>, f64) -> Result<DVector<f64>> + Sync,
{
    if x.nrows() != y.len() {
        return Err(Error::dims(format!("{} rows but {} responses", x.nrows(), y.len())));
    }
    let grid = normalize_grid(lambda_grid)?;
    let folds = kfold_indices(y.len(), k_folds, seed)?;
    let splits: Vec<(Vec<usize>, &Vec<usize>)> = folds
        .iter()
        .map(|val| {
            let mut in_val = vec![false; y.len()];
            val.iter().for_each(|&i| in_val[i] = true);
            ((0..y.len()).filter(|&i| !in_val[i]).collect(), val)
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..folds.len()).map(move |f| (g, f)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train, val) = &splits[f];
            let pred = fit_predict(
                &x.select_rows(train),
                &y.select_rows(train),
                &x.select_rows(val.iter()),
                grid[g],
            )?;
            Ok(-mse(&y.select_rows(val.iter()), &pred)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let fold_scores: Vec<Vec<f64>> = scores.chunks(folds.len()).map(<[f64]>::to_vec).collect();
    let mean_scores: Vec<f64> = fold_scores
        .iter()
        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
        .collect();
    let mut best = 0;
    for (g, &s) in mean_scores.iter().enumerate() {
        if s >= mean_scores[best] || mean_scores[best].is_nan() {
            best = g;
        }
    }
    Ok(CvResult {
        best_lambda: grid[best],
        grid,
        fold_scores,
        mean_scores,
    })
}

/// Grid search over λ for BKerNN trained with `cfg_base` (its λ is ignored).
pub fn cross_validate(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg_base: &TrainConfig,
    lambda_grid: &[f64],
    k_folds: usize,
    seed: u64,
) -> Result<CvResult> {
    cross_validate_with(x, y, lambda_grid, k_folds, seed, |xt, yt, xv, lambda| {
        let (model, _) = fit(xt, yt, &cfg_base.with_lambda(lambda))?;
        model.predict(xv)
    })
}
