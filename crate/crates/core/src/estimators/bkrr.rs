use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{mdb_cross_kernel, mdb_kernel_matrix};
use crate::ridge::solve_inner;
use crate::trainer::check_training_data;

/// Kernel ridge regression with the multi-dimensional Brownian kernel
/// `(‖x‖ + ‖x'‖ − ‖x − x'‖)/2` and an unregularized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct BkrrModel {
    pub x_train: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

impl BkrrModel {
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<Self> {
        check_training_data(x, y)?;
        let k = mdb_kernel_matrix(x);
        let sol = solve_inner(&k, y, lambda)?;
        Ok(BkrrModel {
            x_train: x.clone(),
            alpha: sol.alpha,
            intercept: sol.intercept,
            lambda,
        })
    }

    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x_new.ncols() != self.x_train.ncols() {
            return Err(Error::dims(format!(
                "model expects {} columns, data has {}",
                self.x_train.ncols(),
                x_new.ncols()
            )));
        }
        let block = mdb_cross_kernel(&self.x_train, x_new)?;
        Ok(block * &self.alpha + DVector::from_element(x_new.nrows(), self.intercept))
    }
}

pub fn bkrr_fit_predict(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    x_new: &DMatrix<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    BkrrModel::fit(x, y, lambda)?.predict(x_new)
}
