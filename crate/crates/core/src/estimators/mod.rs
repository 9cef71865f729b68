//! Fitted BKerNN models and the baselines they are compared against.

mod bkrr;
mod cv;
mod relu;

pub use bkrr::{bkrr_fit_predict, BkrrModel};
pub use cv::{cross_validate, cross_validate_with, kfold_indices, CvResult};
pub use relu::{relunn_fit, relunn_fit_observed, ReluGradients, ReluNetState};

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{averaged_kernel_matrix, cross_kernel, ScalarKernel};
use crate::ridge::solve_inner;
use crate::trainer::{check_training_data, TrainConfig};

/// A fitted BKerNN predictor `f(x) = c + Σ_i α_i K_W(x_i, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// `d × m` particles.
    pub particles: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub intercept: f64,
    /// Training covariates, one sample per row.
    pub x_train: DMatrix<f64>,
    pub kernel: ScalarKernel,
    /// Configuration the model was trained with.
    pub config: TrainConfig,
}

impl ModelState {
    pub fn d(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn m(&self) -> usize {
        self.particles.ncols()
    }

    /// Predictions for the rows of `x_new`.
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x_new.ncols() != self.d() {
            return Err(Error::dims(format!(
                "model expects {} columns, data has {}",
                self.d(),
                x_new.ncols()
            )));
        }
        let block = cross_kernel(&self.x_train, x_new, &self.particles, self.kernel)?;
        Ok(block * &self.alpha + DVector::from_element(x_new.nrows(), self.intercept))
    }

    /// In-sample predictions `Kα + c`.
    pub fn fitted(&self) -> Result<DVector<f64>> {
        let k = averaged_kernel_matrix(&self.x_train, &self.particles, self.kernel)?;
        Ok(k.as_matrix() * &self.alpha + DVector::from_element(self.alpha.len(), self.intercept))
    }

    /// Versioned JSON document; floats are written in shortest round-trip form.
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kernel: self.kernel,
            config: self.config,
            d: self.d(),
            m: self.m(),
            n: self.alpha.len(),
            intercept: self.intercept,
            alpha: self.alpha.as_slice().to_vec(),
            particles: rows_of(&self.particles),
            x_train: rows_of(&self.x_train),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::Format(format!("unexpected format '{}'", doc.format)));
        }
        if doc.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported version {}", doc.version)));
        }
        let particles = matrix_of(&doc.particles, doc.d, doc.m, "particles")?;
        let x_train = matrix_of(&doc.x_train, doc.n, doc.d, "x_train")?;
        if doc.alpha.len() != doc.n {
            return Err(Error::Format(format!(
                "alpha has {} entries, expected {}",
                doc.alpha.len(),
                doc.n
            )));
        }
        Ok(ModelState {
            particles,
            alpha: DVector::from_vec(doc.alpha),
            intercept: doc.intercept,
            x_train,
            kernel: doc.kernel,
            config: doc.config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

const MODEL_FORMAT: &str = "bkernn-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    kernel: ScalarKernel,
    config: TrainConfig,
    d: usize,
    m: usize,
    n: usize,
    intercept: f64,
    alpha: Vec<f64>,
    /// `d` rows of `m` values.
    particles: Vec<Vec<f64>>,
    /// `n` rows of `d` values.
    x_train: Vec<Vec<f64>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_of(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("{what} is not {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Inner ridge solve at given particles, without any particle update.
pub fn fit_fixed_particles(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    particles: &DMatrix<f64>,
    lambda: f64,
    kernel: ScalarKernel,
) -> Result<ModelState> {
    check_training_data(x, y)?;
    let config = TrainConfig::new(particles.ncols(), lambda).with_kernel(kernel);
    config.validate()?;
    let k = averaged_kernel_matrix(x, particles, kernel)?;
    let sol = solve_inner(&k, y, lambda)?;
    Ok(ModelState {
        particles: particles.clone(),
        alpha: sol.alpha,
        intercept: sol.intercept,
        x_train: x.clone(),
        kernel,
        config,
    })
}
