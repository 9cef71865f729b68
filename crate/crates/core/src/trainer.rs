//! Proximal gradient training of the particles.
//!
//! Each iteration rebuilds the averaged kernel, solves the inner ridge problem in
//! closed form, takes the gradient of the reduced objective `G` with respect to the
//! particles and performs one proximal step whose size is chosen by backtracking.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ModelState;
use crate::kernels::{averaged_kernel_matrix, sign, KernelMatrix, Projections, ScalarKernel};
use crate::penalties::Penalty;
use crate::ridge::{solve_inner, RidgeSolution};
use crate::rng::seeded;

/// Step growth applied before each line search.
pub const STEP_GROWTH: f64 = 1.5;
/// Accepted step sizes stay within `[MIN_STEP_RATIO, MAX_STEP_RATIO] · gamma0`.
pub const MIN_STEP_RATIO: f64 = 1e-12;
pub const MAX_STEP_RATIO: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of particles.
    pub m: usize,
    pub lambda: f64,
    /// Initial step size of the proximal gradient iterations.
    pub gamma0: f64,
    pub n_iter: usize,
    pub penalty: Penalty,
    pub kernel: ScalarKernel,
    /// Seed of the particle initialization.
    pub seed: u64,
}

impl TrainConfig {
    pub const DEFAULT_GAMMA0: f64 = 500.0;
    pub const DEFAULT_ITERATIONS: usize = 20;

    /// Basic penalty, Brownian kernel, `gamma0 = 500`, 20 iterations, seed 0.
    pub fn new(m: usize, lambda: f64) -> Self {
        TrainConfig {
            m,
            lambda,
            gamma0: Self::DEFAULT_GAMMA0,
            n_iter: Self::DEFAULT_ITERATIONS,
            penalty: Penalty::Basic,
            kernel: ScalarKernel::Brownian,
            seed: 0,
        }
    }

    pub fn with_penalty(mut self, penalty: Penalty) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_kernel(mut self, kernel: ScalarKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_iterations(mut self, n_iter: usize) -> Self {
        self.n_iter = n_iter;
        self
    }

    pub fn with_gamma0(mut self, gamma0: f64) -> Self {
        self.gamma0 = gamma0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("m must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::param(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if self.n_iter == 0 {
            return Err(Error::param("n_iter must be at least 1"));
        }
        self.penalty.validate()
    }
}

/// `2 · max_i ‖x_i‖₂ / n`, the default regularization strength.
pub fn default_lambda(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows().max(1) as f64;
    let max_norm = x.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    2.0 * max_norm / n
}

/// Diagnostics of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// `G + λΩ` at the initial particles and after every iteration.
    pub objective_trace: Vec<f64>,
    /// Accepted step size per iteration.
    pub step_trace: Vec<f64>,
    /// Number of step halvings per iteration.
    pub backtrack_counts: Vec<usize>,
    /// Iterations whose line search underflowed and left the particles unchanged.
    pub stalled_iterations: Vec<usize>,
}

impl TrainReport {
    /// Largest increase of the objective between consecutive iterations (≤ 0 when monotone).
    pub fn max_objective_rise(&self) -> f64 {
        self.objective_trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Particles drawn i.i.d. from `N(0, 1/d)`, column by column.
pub fn init_particles(d: usize, m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded(seed);
    let scale = 1.0 / (d.max(1) as f64).sqrt();
    let mut w = DMatrix::zeros(d, m);
    for j in 0..m {
        for a in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            w[(a, j)] = z * scale;
        }
    }
    w
}

/// For every `i`, `Σ_i' z_i' · sign(p_i − p_i')`, computed by sorting `p`.
fn signed_partial_sums(p: &[f64], z: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let total: f64 = z.iter().sum();
    let mut out = vec![0.0; n];
    let mut below = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && p[order[end]] == p[order[start]] {
            end += 1;
        }
        let group: f64 = order[start..end].iter().map(|&i| z[i]).sum();
        let above = total - below - group;
        for &i in &order[start..end] {
            out[i] = below - above;
        }
        below += group;
        start = end;
    }
    out
}

/// Gradient of `G` with respect to the particle matrix, given `z = (K̃ + nλI)⁻¹Ỹ`.
///
/// For the Brownian kernel column `j` equals
/// `(λ/4m) Σ_{i,i'} z_i z_i' sign(w_jᵀ(x_i − x_i'))(x_i − x_i')`, evaluated in
/// `O(n log n)` per particle by sorting the projections. The other kernels use
/// the same chain rule through `∂G/∂K_ii' = −(λ/2) z_i z_i'`.
pub fn grad_g(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    z: &DVector<f64>,
    lambda: f64,
    kernel: ScalarKernel,
) -> Result<DMatrix<f64>> {
    let proj = Projections::new(x, w)?;
    if z.len() != proj.n {
        return Err(Error::dims(format!(
            "z has length {} but there are {} samples",
            z.len(),
            proj.n
        )));
    }
    let (n, m) = (proj.n, proj.m);
    let zs = z.as_slice();
    // h[(i, j)] = Σ_i' z_i' ∂₁k(p_ij, p_i'j), dropping terms that vanish because Σz = 0.
    let mut h = DMatrix::zeros(n, m);
    for j in 0..m {
        let p = proj.column(j);
        match kernel {
            ScalarKernel::Brownian => {
                for (i, s) in signed_partial_sums(&p, zs).into_iter().enumerate() {
                    h[(i, j)] = -0.5 * s;
                }
            }
            _ => {
                let mut col = vec![0.0; n];
                for i in 0..n {
                    for i2 in 0..i {
                        // ∂₁k depends on p_i − p_i' only and is odd in it.
                        let v = kernel.d_first(p[i], p[i2]);
                        col[i] += zs[i2] * v;
                        col[i2] -= zs[i] * v;
                    }
                }
                for i in 0..n {
                    h[(i, j)] = col[i];
                }
            }
        }
    }
    for i in 0..n {
        let zi = zs[i];
        for j in 0..m {
            h[(i, j)] *= zi;
        }
    }
    Ok(x.transpose() * h * (-lambda / m as f64))
}

/// Reference gradient for the Brownian kernel: the literal `O(n² d m)` double sum.
pub fn grad_g_pairwise(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    z: &DVector<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    if x.ncols() != w.nrows() || z.len() != x.nrows() {
        return Err(Error::dims("shapes of x, w and z are inconsistent"));
    }
    let (n, d, m) = (x.nrows(), x.ncols(), w.ncols());
    let mut g = DMatrix::zeros(d, m);
    for j in 0..m {
        let wj = w.column(j);
        for i in 0..n {
            for i2 in 0..n {
                let diff = (x.row(i) - x.row(i2)).transpose();
                let s = sign(wj.dot(&diff));
                if s != 0.0 {
                    let coef = z[i] * z[i2] * s;
                    for a in 0..d {
                        g[(a, j)] += coef * diff[a];
                    }
                }
            }
        }
    }
    Ok(g * (lambda / (4.0 * m as f64)))
}

/// Kernel, inner solution and penalty value at one particle matrix.
pub(crate) struct Evaluation {
    pub kernel: KernelMatrix,
    pub sol: RidgeSolution,
    pub penalty: f64,
}

impl Evaluation {
    pub fn objective(&self, lambda: f64) -> f64 {
        self.sol.g_value + lambda * self.penalty
    }
}

pub(crate) fn evaluate(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    cfg: &TrainConfig,
) -> Result<Evaluation> {
    let kernel = averaged_kernel_matrix(x, w, cfg.kernel)?;
    let sol = solve_inner(&kernel, y, cfg.lambda)?;
    Ok(Evaluation {
        kernel,
        sol,
        penalty: cfg.penalty.value(w),
    })
}

/// `G` at the given particles.
pub fn reduced_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    lambda: f64,
    kernel: ScalarKernel,
) -> Result<f64> {
    let k = averaged_kernel_matrix(x, w, kernel)?;
    Ok(solve_inner(&k, y, lambda)?.g_value)
}

/// Result of one backtracking proximal step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub particles: DMatrix<f64>,
    /// Accepted step size, or the incoming one if the search stalled.
    pub gamma: f64,
    pub halvings: usize,
    /// The step size fell below `MIN_STEP_RATIO · gamma0`; particles are unchanged.
    pub stalled: bool,
}

fn search_step(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    current_g: f64,
    grad: &DMatrix<f64>,
    gamma_in: f64,
    cfg: &TrainConfig,
) -> Result<(StepOutcome, Option<Evaluation>)> {
    let lo = MIN_STEP_RATIO * cfg.gamma0;
    let hi = MAX_STEP_RATIO * cfg.gamma0;
    let mut gamma = (gamma_in * STEP_GROWTH).min(hi);
    let mut halvings = 0;
    loop {
        if gamma < lo {
            return Ok((
                StepOutcome {
                    particles: w.clone(),
                    gamma: gamma_in,
                    halvings,
                    stalled: true,
                },
                None,
            ));
        }
        let candidate = cfg.penalty.prox(&(w - grad * gamma), cfg.lambda * gamma);
        let diff = &candidate - w;
        // G(W) − γ⟨∇G, G_γ(W)⟩ + (γ/2)‖G_γ(W)‖² with G_γ(W) = (W − candidate)/γ.
        let bound = current_g + grad.dot(&diff) + diff.norm_squared() / (2.0 * gamma);
        let eval = evaluate(x, y, &candidate, cfg)?;
        if eval.sol.g_value <= bound {
            return Ok((
                StepOutcome {
                    particles: candidate,
                    gamma,
                    halvings,
                    stalled: false,
                },
                Some(eval),
            ));
        }
        gamma /= 2.0;
        halvings += 1;
    }
}

/// One proximal gradient step from `w`: grows the step by 1.5, then halves it until
/// `G(prox(W − γ∇G)) ≤ G(W) − γ⟨∇G, G_γ(W)⟩ + (γ/2)‖G_γ(W)‖²`.
pub fn backtracking_step(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DMatrix<f64>,
    gamma_in: f64,
    cfg: &TrainConfig,
) -> Result<StepOutcome> {
    cfg.validate()?;
    let current = evaluate(x, y, w, cfg)?;
    let grad = grad_g(x, w, &current.sol.alpha, cfg.lambda, cfg.kernel)?;
    Ok(search_step(x, y, w, current.sol.g_value, &grad, gamma_in, cfg)?.0)
}

/// State handed to training observers after initialization and after every step.
pub struct IterationSnapshot<'a> {
    /// 0 for the initial particles, `k` after the `k`-th step.
    pub iteration: usize,
    pub particles: &'a DMatrix<f64>,
    pub alpha: &'a DVector<f64>,
    pub intercept: f64,
    /// In-sample predictions `Kα + c`.
    pub fitted: DVector<f64>,
    pub objective: f64,
}

pub(crate) fn check_training_data(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::dims(format!(
            "{} rows of covariates but {} responses",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::param("training needs at least 2 samples"));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("covariates".into()));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("responses".into()));
    }
    Ok(())
}

/// Trains a BKerNN model from a random particle initialization.
pub fn fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &TrainConfig,
) -> Result<(ModelState, TrainReport)> {
    fit_observed(x, y, cfg, None, |_| {})
}

/// Like [`fit`], optionally starting from given particles and reporting each iteration.
pub fn fit_observed<F>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &TrainConfig,
    init: Option<DMatrix<f64>>,
    mut observer: F,
) -> Result<(ModelState, TrainReport)>
where
    F: FnMut(&IterationSnapshot<'_>),
{
    cfg.validate()?;
    check_training_data(x, y)?;
    let mut w = match init {
        Some(w0) => {
            if w0.nrows() != x.ncols() || w0.ncols() != cfg.m {
                return Err(Error::dims(format!(
                    "initial particles are {}x{}, expected {}x{}",
                    w0.nrows(),
                    w0.ncols(),
                    x.ncols(),
                    cfg.m
                )));
            }
            w0
        }
        None => init_particles(x.ncols(), cfg.m, cfg.seed),
    };

    let mut report = TrainReport::default();
    let mut current = evaluate(x, y, &w, cfg)?;
    let emit = |iteration: usize, w: &DMatrix<f64>, ev: &Evaluation, observer: &mut F| {
        let fitted = ev.kernel.as_matrix() * &ev.sol.alpha
            + DVector::from_element(y.len(), ev.sol.intercept);
        observer(&IterationSnapshot {
            iteration,
            particles: w,
            alpha: &ev.sol.alpha,
            intercept: ev.sol.intercept,
            fitted,
            objective: ev.objective(cfg.lambda),
        });
    };
    report.objective_trace.push(current.objective(cfg.lambda));
    emit(0, &w, &current, &mut observer);

    let mut gamma = cfg.gamma0;
    for it in 0..cfg.n_iter {
        let grad = grad_g(x, &w, &current.sol.alpha, cfg.lambda, cfg.kernel)?;
        if !grad.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient at iteration {it}")));
        }
        let (outcome, eval) = search_step(x, y, &w, current.sol.g_value, &grad, gamma, cfg)?;
        gamma = outcome.gamma;
        report.step_trace.push(outcome.gamma);
        report.backtrack_counts.push(outcome.halvings);
        if outcome.stalled {
            report.stalled_iterations.push(it);
        }
        if let Some(ev) = eval {
            w = outcome.particles;
            current = ev;
        }
        let obj = current.objective(cfg.lambda);
        if !obj.is_finite() {
            return Err(Error::NonFinite(format!("objective at iteration {it}")));
        }
        report.objective_trace.push(obj);
        emit(it + 1, &w, &current, &mut observer);
    }

    let model = ModelState {
        particles: w,
        alpha: current.sol.alpha,
        intercept: current.sol.intercept,
        x_train: x.clone(),
        kernel: cfg.kernel,
        config: *cfg,
    };
    Ok((model, report))
}
