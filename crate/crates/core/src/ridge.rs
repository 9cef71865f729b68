//! Closed-form kernel ridge regression with an unregularised intercept.
//!
//! For a fixed kernel matrix `K` the inner problem
//!
//! ```text
//! min_{α, c}  (1/2n)‖Y − Kα − c·1‖² + (λ/2)·αᵀKα
//! ```
//!
//! is solved by centring: `α = (K̃ + nλI)⁻¹Ỹ`, `c = mean(Y) − mean(Kα)`, and the
//! optimal value is `G = (λ/2)·Ỹᵀα`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernels::{center, KernelMatrix};

/// Solution of the inner problem at fixed particles.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolution {
    /// Dual coefficients; they sum to zero.
    pub alpha: DVector<f64>,
    pub intercept: f64,
    /// Reduced objective `G`.
    pub g_value: f64,
}

fn check_inputs(k: &KernelMatrix, y: &DVector<f64>, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("lambda must be positive and finite, got {lambda}")));
    }
    if k.n() != y.len() {
        return Err(Error::dims(format!(
            "kernel matrix is {n}x{n} but response has length {}",
            y.len(),
            n = k.n()
        )));
    }
    if k.n() == 0 {
        return Err(Error::param("empty system"));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("response".into()));
    }
    if !k.as_matrix().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("kernel matrix".into()));
    }
    Ok(())
}

fn factorize(mut a: DMatrix<f64>, jitter: f64) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol);
    }
    for i in 0..a.nrows() {
        a[(i, i)] += jitter;
    }
    Cholesky::new(a).ok_or_else(|| {
        Error::Factorization("K̃ + nλI is not positive definite; kernel matrix is not PSD".into())
    })
}

/// Closed-form `(α, c)` and reduced objective for the kernel `k`.
pub fn solve_inner(k: &KernelMatrix, y: &DVector<f64>, lambda: f64) -> Result<RidgeSolution> {
    check_inputs(k, y, lambda)?;
    let n = k.n();
    let nf = n as f64;
    let sys = center(k, y);
    let jitter = 1e-10 * sys.k_tilde.trace().abs() / nf;
    let mut a = sys.k_tilde;
    for i in 0..n {
        a[(i, i)] += nf * lambda;
    }
    let chol = factorize(a, jitter)?;
    let alpha = chol.solve(&sys.y_tilde);
    let k_alpha = k.as_matrix() * &alpha;
    let intercept = sys.y_mean - k_alpha.sum() / nf;
    let g_value = 0.5 * lambda * sys.y_tilde.dot(&alpha);
    if !g_value.is_finite() || !intercept.is_finite() {
        return Err(Error::NonFinite("inner ridge solve".into()));
    }
    Ok(RidgeSolution {
        alpha,
        intercept,
        g_value,
    })
}

/// `(1/2n)‖Y − Kα − c·1‖² + (λ/2)·αᵀKα` evaluated directly.
pub fn objective_full(k: &KernelMatrix, y: &DVector<f64>, sol: &RidgeSolution, lambda: f64) -> f64 {
    objective_at(k, y, &sol.alpha, sol.intercept, lambda)
}

pub(crate) fn objective_at(
    k: &KernelMatrix,
    y: &DVector<f64>,
    alpha: &DVector<f64>,
    intercept: f64,
    lambda: f64,
) -> f64 {
    let n = y.len() as f64;
    let k_alpha = k.as_matrix() * alpha;
    let resid = y - &k_alpha - DVector::from_element(y.len(), intercept);
    resid.norm_squared() / (2.0 * n) + 0.5 * lambda * alpha.dot(&k_alpha)
}
