//! Prediction and feature-recovery scores.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::penalties::{row_norms, Penalty};

/// Coefficient of determination `1 − Σ(y − ŷ)² / Σ(y − ȳ)²`.
pub fn r2_score(y_true: &DVector<f64>, y_pred: &DVector<f64>) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::dims(format!(
            "{} targets but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::param("R² needs at least 2 samples"));
    }
    let mean = y_true.mean();
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let ss_res = (y_true - y_pred).norm_squared();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean squared error.
pub fn mse(y_true: &DVector<f64>, y_pred: &DVector<f64>) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::dims(format!(
            "{} targets but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::param("MSE of an empty sample"));
    }
    Ok((y_true - y_pred).norm_squared() / y_true.len() as f64)
}

/// A `d × k` matrix whose columns span a feature subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis {
    p: DMatrix<f64>,
}

impl FeatureBasis {
    /// Requires `1 ≤ k ≤ d` and finite entries; full column rank is checked when scoring.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        let (d, k) = p.shape();
        if k == 0 || k > d {
            return Err(Error::param(format!("feature basis must be d x k with 1 <= k <= d, got {d}x{k}")));
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature basis".into()));
        }
        Ok(FeatureBasis { p })
    }

    /// First `k` columns of the `d × d` identity.
    pub fn coordinates(d: usize, k: usize) -> Result<Self> {
        Self::new(DMatrix::identity(d, k))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.p
    }

    pub fn d(&self) -> usize {
        self.p.nrows()
    }

    pub fn k(&self) -> usize {
        self.p.ncols()
    }

    /// Orthonormal basis of the same span, `Q = P·L⁻ᵀ` with `PᵀP = LLᵀ`.
    pub fn orthonormalized(&self) -> Result<DMatrix<f64>> {
        let gram = self.p.transpose() * &self.p;
        let max_diag = gram.diagonal().max();
        let chol = gram.cholesky().ok_or(Error::SingularGram)?;
        let l = chol.l();
        let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
        if !(max_diag > 0.0) || min_pivot * min_pivot <= 1e-14 * max_diag {
            return Err(Error::SingularGram);
        }
        let qt = l
            .solve_lower_triangular(&self.p.transpose())
            .ok_or(Error::SingularGram)?;
        Ok(qt.transpose())
    }

    /// Orthogonal projection `P(PᵀP)⁻¹Pᵀ` onto the span.
    pub fn projection(&self) -> Result<DMatrix<f64>> {
        let q = self.orthonormalized()?;
        Ok(&q * q.transpose())
    }
}

/// Estimated features together with a rank-deficiency flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedFeatures {
    pub basis: FeatureBasis,
    /// Fewer than `k` informative directions were found; the rest are padding.
    pub padded: bool,
}

/// Extends orthonormal columns to `k` columns using coordinate vectors.
fn pad_orthonormal(mut cols: Vec<DVector<f64>>, d: usize, k: usize) -> Vec<DVector<f64>> {
    for a in 0..d {
        if cols.len() >= k {
            break;
        }
        let mut v = DVector::zeros(d);
        v[a] = 1.0;
        // Two passes of Gram-Schmidt keep the result orthogonal to working precision.
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    cols
}

/// `k` estimated feature directions from particles `w`.
///
/// Spectral penalties (basic, feature, concave feature) use the top-`k` left
/// singular vectors; variable penalties use the `k` coordinates with the largest
/// row norms, lowest index first on ties.
pub fn extract_features(w: &DMatrix<f64>, k: usize, kind: &Penalty) -> Result<ExtractedFeatures> {
    let d = w.nrows();
    if k == 0 || k > d {
        return Err(Error::param(format!("need 1 <= k <= d = {d}, got k = {k}")));
    }
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("particles".into()));
    }
    if kind.is_spectral() {
        spectral_features(w, k)
    } else {
        let norms = row_norms(w);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
        let mut p = DMatrix::zeros(d, k);
        for (col, &a) in order.iter().take(k).enumerate() {
            p[(a, col)] = 1.0;
        }
        let padded = order.iter().take(k).any(|&a| norms[a] == 0.0);
        Ok(ExtractedFeatures {
            basis: FeatureBasis::new(p)?,
            padded,
        })
    }
}

/// Top-`k` left singular vectors, padded when the rank is below `k`.
pub fn spectral_features(w: &DMatrix<f64>, k: usize) -> Result<ExtractedFeatures> {
    let d = w.nrows();
    if k == 0 || k > d {
        return Err(Error::param(format!("need 1 <= k <= d = {d}, got k = {k}")));
    }
    let mut cols = Vec::with_capacity(k);
    if w.ncols() > 0 {
        let svd = SVD::new(w.clone(), true, false);
        let u = svd.u.ok_or_else(|| Error::Factorization("SVD did not return U".into()))?;
        let s = svd.singular_values;
        let s_max = s.max();
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        for &i in order.iter().take(k) {
            if s_max > 0.0 && s[i] > 1e-12 * s_max {
                cols.push(u.column(i).into_owned());
            }
        }
    }
    let padded = cols.len() < k;
    let cols = pad_orthonormal(cols, d, k);
    Ok(ExtractedFeatures {
        basis: FeatureBasis::new(DMatrix::from_columns(&cols))?,
        padded,
    })
}

/// `1 − ‖π_P − π_P̂‖²_F / N` with `N = 2k` if `k ≤ d/2` and `2d − 2k` otherwise; 1 when `k = d`.
pub fn feature_score(p_true: &FeatureBasis, p_hat: &FeatureBasis, d: usize, k: usize) -> Result<f64> {
    for b in [p_true, p_hat] {
        if b.d() != d || b.k() != k {
            return Err(Error::dims(format!(
                "basis is {}x{}, expected {d}x{k}",
                b.d(),
                b.k()
            )));
        }
    }
    let q1 = p_true.orthonormalized()?;
    let q2 = p_hat.orthonormalized()?;
    if k == d {
        return Ok(1.0);
    }
    // ‖π₁ − π₂‖² = tr π₁ + tr π₂ − 2 tr(π₁π₂) = 2k − 2‖Q₁ᵀQ₂‖².
    let overlap = (q1.transpose() * q2).norm_squared();
    let dist = (2.0 * k as f64 - 2.0 * overlap).max(0.0);
    let denom = if 2 * k <= d {
        2.0 * k as f64
    } else {
        2.0 * (d - k) as f64
    };
    Ok((1.0 - dist / denom).clamp(0.0, 1.0))
}
