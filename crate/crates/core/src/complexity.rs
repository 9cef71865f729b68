//! Monte-Carlo probe of the Gaussian complexity of single-index Brownian units.
//!
//! For a fixed direction `w` and noise `ε`, the supremum of `(1/n) Σ_i ε_i g(wᵀx_i)`
//! over the unit ball of the Brownian RKHS is `sqrt(εᵀK^(w)ε)/n`. The probe
//! averages the maximum of this quantity over sampled directions, which is a
//! lower bound on the true expected supremum over the sphere.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, Rng};

/// Unit sphere the directions are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sphere {
    L1,
    L2,
}

impl Sphere {
    /// Dual norm of `x`: `‖x‖∞` for the ℓ1 sphere, `‖x‖₂` for the ℓ2 sphere.
    pub fn dual_norm(self, x: &[f64]) -> f64 {
        match self {
            Sphere::L1 => x.iter().fold(0.0, |a: f64, v| a.max(v.abs())),
            Sphere::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Standard normal draw normalized in this sphere's norm.
    pub fn sample(self, d: usize, rng: &mut Rng) -> DVector<f64> {
        loop {
            let g: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut *rng));
            let norm = match self {
                Sphere::L1 => g.lp_norm(1),
                Sphere::L2 => g.norm(),
            };
            if norm > 0.0 {
                return g / norm;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub n_noise_draws: usize,
    pub n_direction_draws: usize,
    pub sphere: Sphere,
    pub seed: u64,
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_noise_draws == 0 || self.n_direction_draws == 0 {
            return Err(Error::param("probe needs at least one noise draw and one direction"));
        }
        Ok(())
    }
}

/// `εᵀK^(w)ε` for the Brownian kernel on projections `p`, in `O(n log n)`.
pub fn brownian_quadratic_form(p: &[f64], eps: &[f64]) -> f64 {
    // εᵀKε = (Σε)(Σε|p|) − ½ Σ_{i,i'} ε_i ε_i' |p_i − p_i'|.
    let total: f64 = eps.iter().sum();
    let weighted: f64 = eps.iter().zip(p).map(|(e, v)| e * v.abs()).sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let (mut s, mut t, mut pairs) = (0.0, 0.0, 0.0);
    for &i in &order {
        // Σ_{i' before i} ε_i' (p_i − p_i').
        pairs += eps[i] * (p[i] * s - t);
        s += eps[i];
        t += eps[i] * p[i];
    }
    total * weighted - pairs
}

/// `sqrt(max(0, εᵀK^(w)ε)) / n` with the Brownian particle kernel.
pub fn inner_sup(x: &DMatrix<f64>, w: &DVector<f64>, eps: &DVector<f64>) -> Result<f64> {
    if x.ncols() != w.len() || x.nrows() != eps.len() {
        return Err(Error::dims(format!(
            "x is {}x{}, w has {} entries, eps has {}",
            x.nrows(),
            x.ncols(),
            w.len(),
            eps.len()
        )));
    }
    let n = x.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let p = x * w;
    let q = brownian_quadratic_form(p.as_slice(), eps.as_slice());
    Ok(q.max(0.0).sqrt() / n as f64)
}

/// Average over noise draws of the best sampled direction.
///
/// Noise draw `t` uses its own noise stream and its own direction stream, so
/// raising `n_direction_draws` only adds candidates and never lowers the estimate.
pub fn estimate_gn(x: &DMatrix<f64>, cfg: &ProbeConfig) -> Result<f64> {
    cfg.validate()?;
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(Error::param("probe needs non-empty data"));
    }
    let noise_base = derive_seed(cfg.seed, 1);
    let dir_base = derive_seed(cfg.seed, 2);
    let sups: Vec<f64> = (0..cfg.n_noise_draws)
        .into_par_iter()
        .map(|t| {
            let mut noise_rng = seeded(derive_seed(noise_base, t as u64));
            let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut noise_rng)).collect();
            let mut dir_rng = seeded(derive_seed(dir_base, t as u64));
            let mut best = 0.0f64;
            for _ in 0..cfg.n_direction_draws {
                let w = cfg.sphere.sample(d, &mut dir_rng);
                let p = x * w;
                let q = brownian_quadratic_form(p.as_slice(), &eps);
                best = best.max(q.max(0.0).sqrt() / n as f64);
            }
            best
        })
        .collect();
    Ok(sups.iter().sum::<f64>() / sups.len() as f64)
}

/// Dimension-dependent upper bound `8 sqrt(d/n) sqrt(log(n+1)) sqrt(mean ‖x_i‖*)`.
pub fn dimension_dependent_bound(x: &DMatrix<f64>, sphere: Sphere) -> f64 {
    let (n, d) = x.shape();
    let nf = n.max(1) as f64;
    let mean_dual = x
        .row_iter()
        .map(|r| sphere.dual_norm(r.transpose().as_slice()))
        .sum::<f64>()
        / nf;
    8.0 * (d as f64 / nf).sqrt() * (nf + 1.0).ln().sqrt() * mean_dual.sqrt()
}
