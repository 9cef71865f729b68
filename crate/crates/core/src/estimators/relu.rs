use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// One-hidden-layer ReLU network `f(x) = c + Σ_j η_j max(0, w_jᵀx + b_j)` and its SGD settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetState {
    /// `m × d`, one neuron per row.
    pub hidden_weights: DMatrix<f64>,
    pub hidden_bias: DVector<f64>,
    pub output_weights: DVector<f64>,
    pub output_bias: f64,
    pub step_size: f64,
    pub batch_size: usize,
    pub n_steps: usize,
}

/// Gradient of `½·mean((f(x) − y)²)` with respect to each parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluGradients {
    pub hidden_weights: DMatrix<f64>,
    pub hidden_bias: DVector<f64>,
    pub output_weights: DVector<f64>,
    pub output_bias: f64,
}

impl ReluGradients {
    fn zeros(m: usize, d: usize) -> Self {
        ReluGradients {
            hidden_weights: DMatrix::zeros(m, d),
            hidden_bias: DVector::zeros(m),
            output_weights: DVector::zeros(m),
            output_bias: 0.0,
        }
    }

    fn reset(&mut self) {
        self.hidden_weights.fill(0.0);
        self.hidden_bias.fill(0.0);
        self.output_weights.fill(0.0);
        self.output_bias = 0.0;
    }
}

impl ReluNetState {
    /// Hidden weights `N(0, 1/d)`, hidden biases `U[−1, 1]`, output weights `N(0, 1/m)`, output bias 0.
    pub fn init(d: usize, m: usize, step_size: f64, batch_size: usize, n_steps: usize, seed: u64) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(Error::param("ReLU network needs d >= 1 and m >= 1"));
        }
        let mut rng = seeded(seed);
        let sw = 1.0 / (d as f64).sqrt();
        let so = 1.0 / (m as f64).sqrt();
        let mut normal = |scale: f64| -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        };
        let hidden_weights = DMatrix::from_fn(m, d, |_, _| normal(sw));
        let output_weights = DVector::from_fn(m, |_, _| normal(so));
        let hidden_bias = DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0));
        let state = ReluNetState {
            hidden_weights,
            hidden_bias,
            output_weights,
            output_bias: 0.0,
            step_size,
            batch_size,
            n_steps,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn width(&self) -> usize {
        self.hidden_weights.nrows()
    }

    pub fn d(&self) -> usize {
        self.hidden_weights.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.width();
        if self.hidden_bias.len() != m || self.output_weights.len() != m {
            return Err(Error::dims("ReLU parameter blocks have inconsistent widths"));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::param(format!("step size must be non-negative, got {}", self.step_size)));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be at least 1"));
        }
        Ok(())
    }

    fn check_x(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.d() {
            return Err(Error::dims(format!(
                "network expects {} columns, data has {}",
                self.d(),
                x.ncols()
            )));
        }
        Ok(())
    }

    fn forward_row(&self, x: &DMatrix<f64>, i: usize, hidden: &mut [f64], pre: &mut [f64]) -> f64 {
        let mut f = self.output_bias;
        for j in 0..self.width() {
            let mut s = self.hidden_bias[j];
            for a in 0..self.d() {
                s += self.hidden_weights[(j, a)] * x[(i, a)];
            }
            pre[j] = s;
            hidden[j] = s.max(0.0);
            f += self.output_weights[j] * hidden[j];
        }
        f
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_x(x)?;
        let m = self.width();
        let (mut h, mut p) = (vec![0.0; m], vec![0.0; m]);
        Ok(DVector::from_fn(x.nrows(), |i, _| self.forward_row(x, i, &mut h, &mut p)))
    }

    /// `½·mean((f(x) − y)²)`.
    pub fn loss(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
        let p = self.predict(x)?;
        if p.len() != y.len() {
            return Err(Error::dims("rows and responses differ in length"));
        }
        Ok(0.5 * (p - y).norm_squared() / y.len().max(1) as f64)
    }

    fn accumulate(&self, x: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize], g: &mut ReluGradients, h: &mut [f64], pre: &mut [f64]) -> f64 {
        g.reset();
        let scale = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        for &i in rows {
            let r = self.forward_row(x, i, h, pre) - y[i];
            loss += 0.5 * r * r;
            let r = r * scale;
            g.output_bias += r;
            for j in 0..self.width() {
                g.output_weights[j] += r * h[j];
                // ReLU derivative is taken as 0 at 0.
                if pre[j] > 0.0 {
                    let back = r * self.output_weights[j];
                    g.hidden_bias[j] += back;
                    for a in 0..self.d() {
                        g.hidden_weights[(j, a)] += back * x[(i, a)];
                    }
                }
            }
        }
        loss * scale
    }

    /// Backpropagation gradient of the loss over all rows of `x`.
    pub fn gradients(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<ReluGradients> {
        self.check_x(x)?;
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::dims("rows and responses differ in length or are empty"));
        }
        let m = self.width();
        let mut g = ReluGradients::zeros(m, self.d());
        let rows: Vec<usize> = (0..y.len()).collect();
        self.accumulate(x, y, &rows, &mut g, &mut vec![0.0; m], &mut vec![0.0; m]);
        Ok(g)
    }

    fn apply(&mut self, g: &ReluGradients) {
        let s = self.step_size;
        self.hidden_weights -= &g.hidden_weights * s;
        self.hidden_bias -= &g.hidden_bias * s;
        self.output_weights -= &g.output_weights * s;
        self.output_bias -= s * g.output_bias;
    }
}

/// Minibatch SGD for `state0.n_steps` steps; batches come from per-epoch shuffles
/// and an incomplete final batch of each epoch is skipped.
pub fn relunn_fit(x: &DMatrix<f64>, y: &DVector<f64>, state0: &ReluNetState, seed: u64) -> Result<ReluNetState> {
    relunn_fit_observed(x, y, state0, seed, |_, _| {})
}

/// [`relunn_fit`] calling `observer(step, state)` after every update.
pub fn relunn_fit_observed<F>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    state0: &ReluNetState,
    seed: u64,
    mut observer: F,
) -> Result<ReluNetState>
where
    F: FnMut(usize, &ReluNetState),
{
    state0.validate()?;
    state0.check_x(x)?;
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::dims(format!("{n} rows but {} responses", y.len())));
    }
    if state0.batch_size > n {
        return Err(Error::param(format!(
            "batch size {} exceeds sample size {n}",
            state0.batch_size
        )));
    }
    let mut state = state0.clone();
    let m = state.width();
    let b = state.batch_size;
    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let per_epoch = n / b;
    let mut g = ReluGradients::zeros(m, state.d());
    let (mut h, mut pre) = (vec![0.0; m], vec![0.0; m]);
    for step in 0..state.n_steps {
        let slot = step % per_epoch;
        if slot == 0 {
            order.shuffle(&mut rng);
        }
        let rows = &order[slot * b..(slot + 1) * b];
        let loss = state.accumulate(x, y, rows, &mut g, &mut h, &mut pre);
        if !loss.is_finite() {
            return Err(Error::Diverged(step));
        }
        state.apply(&g);
        observer(step, &state);
    }
    if !state.hidden_weights.iter().chain(state.output_weights.iter()).all(|v| v.is_finite()) {
        return Err(Error::Diverged(state.n_steps));
    }
    Ok(state)
}
