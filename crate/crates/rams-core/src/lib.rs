//! Adaptive sampling for physics-informed and operator learning, built around
//! residual-based adversarial-gradient moving samples (RAMS): training samples
//! are treated as trainable parameters and moved by gradient ascent on the
//! squared PDE residual, then projected back to the sampling space.
//!
//! The crate is organized along the pipeline:
//!
//! - [`autodiff`]: scalar tape (reverse mode), directional jets (forward mode,
//!   second order), and sample-coordinate gradients.
//! - [`models`]: MLP and DeepONet networks over plain or jet arithmetic, with
//!   a batched jet-backprop engine for training.
//! - [`optim`]: Adam and L-BFGS (strong Wolfe).
//! - [`problems`]: residual/boundary/initial operators and loss assembly for
//!   the benchmark PDEs.
//! - [`sampling`]: Random/LHS/Halton generation, RAR-G/RAR-D/R3 selection,
//!   RAMS ascent, and the full training-loop runners.
//! - [`funcspace`]: Gaussian-random-field function sampling and the
//!   kernel-smoothing projector.
//! - [`oracles`]: closed forms, reference PDE solvers, and error metrics.
//! - [`train`]: full-batch loss/gradient engines used by the runners.
//! - [`harness`]: experiment configs, the run matrix, reports, and overhead
//!   measurement.

pub mod autodiff;
pub mod funcspace;
pub mod harness;
pub mod models;
pub mod optim;
pub mod oracles;
pub mod problems;
pub mod sampling;
pub mod train;

use thiserror::Error;

/// Crate-wide error type. Variants mirror the failure classes of the public
/// contracts: structural misuse, numeric blow-ups, domain violations, bad
/// configurations, and solver/metric failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("gradient mask selects no coordinates")]
    EmptyGradient,
    #[error("undefined metric: {0}")]
    Metric(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
