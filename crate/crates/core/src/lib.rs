//! Differentiable query-strategy search for pool-based active learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`diffcore`]: dense matrices, a small multilayer perceptron with an analytic
//!   backward pass, and SGD/Adam.
//! - [`pool`]: datasets, the labeled/unlabeled pool, synthetic generators and
//!   IDX/CSV ingestion.
//! - [`strategies`]: the candidate acquisition functions and the per-sample score table.
//! - [`gmixture`]: univariate Gaussian mixtures fitted by EM, used to derive the
//!   selection threshold.
//! - [`autoal`]: SearchNet/FitNet bi-level training, score mixing and query selection.
//!
//! All numerical code is generic over [`Real`]; the aliases below fix the scalar
//! to `f64`, which is what the training loops and gradient checks are tuned for.

pub mod autoal;
pub mod diffcore;
mod error;
pub mod gmixture;
pub mod pool;
mod scalar;
pub mod seed;
pub mod strategies;

pub use error::{Error, Result};
pub use scalar::Real;

/// Dense row-major `f64` matrix.
pub type Matrix = diffcore::RealMatrix<f64>;
/// Multilayer perceptron over `f64`.
pub type Mlp = diffcore::MlpNetwork<f64>;
/// Dataset with `f64` features.
pub type Dataset = pool::Dataset<f64>;
/// Labeled/unlabeled pool over an `f64` dataset.
pub type DataPool = pool::DataPool<f64>;
/// Univariate Gaussian mixture over `f64`.
pub type GaussianMixture = gmixture::GaussianMixture<f64>;
/// Strategy score table over `f64`.
pub type ScoreTable = strategies::StrategyScoreTable<f64>;
/// Model outputs consumed by the acquisition functions.
pub type Predictions = strategies::PredictionBundle<f64>;
/// SearchNet plus loss-prediction head over `f64`.
pub type SearchHead = autoal::SearchHead<f64>;
pub use autoal::AutoAlConfig;
