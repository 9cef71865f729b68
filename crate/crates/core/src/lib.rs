//! Brownian kernel neural networks (BKerNN).
//!
//! A BKerNN predictor has the form
//!
//! ```text
//! f(x) = c + Σ_i α_i · (1/m) Σ_j k(w_jᵀx_i, w_jᵀx)
//! ```
//!
//! where `k` is the Brownian kernel `k(a, b) = (|a| + |b| - |a - b|) / 2` and the
//! particles `w_1, …, w_m` are learned. Training alternates a closed-form kernel
//! ridge solve for `(α, c)` with one proximal gradient step on the particles, so
//! the learned particle matrix doubles as a feature extractor for multi-index
//! models.
//!
//! Modules:
//!
//! - [`kernels`]: scalar kernels, averaged and cross kernel matrices, centring.
//! - [`ridge`]: the inner closed-form solve and the reduced objective `G`.
//! - [`penalties`]: the five particle penalties and their proximal operators.
//! - [`trainer`]: gradient of `G`, backtracking proximal steps, the training loop.
//! - [`estimators`]: fitted models, prediction, the BKRR and ReLU baselines,
//!   cross-validation, model files.
//! - [`metrics`]: R², feature extraction, the feature-learning score.
//! - [`datagen`]: synthetic data, Haar orthogonal sampling, CSV ingestion.
//! - [`complexity`]: Monte-Carlo Gaussian-complexity probe.
//! - [`experiments`]: the experiment protocols behind the `bkernn experiment` command.
//! - [`cli`]: the command-line front end used by the `bkernn` binary.

pub mod cli;
pub mod complexity;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod kernels;
pub mod metrics;
pub mod penalties;
pub mod ridge;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use estimators::{ModelState, ReluNetState};
pub use kernels::{KernelMatrix, ScalarKernel};
pub use penalties::Penalty;
pub use trainer::{fit, TrainConfig, TrainReport};

/// Particle matrix: `d × m`, one projection direction per column.
pub type ParticleMatrix = nalgebra::DMatrix<f64>;
