//! SearchNet/FitNet strategy search: score shaping and mixing, the alternating bi-level
//! training round, query selection and the full active-learning loop.

mod config;
mod head;
pub mod objective;
mod run;
mod select;
mod train;

pub use config::{AutoAlConfig, FitWeighting, GmmInput};
pub use head::{LossPredictionHead, ObjectiveScales, SearchBatch, SearchGradients, SearchHead, SearchStep};
pub use objective::{
    fitnet_loss, loss_prediction_loss, mix_scores, mixed_scores_with_grad, regularization_loss, searchnet_loss,
    shape_scores, soft_select_count, strategy_weights,
};
pub use run::{normalize_round_scores, run_active_learning, run_autoal, Method, PhaseTimings, RoundRow, RunRecord};
pub use select::{select_query, QueryOutcome};
pub use train::{
    accuracy, bilevel_train_round, fit_threshold, fitnet_objective, mixed_scores, new_classifier, train_classifier,
    weighted_ce_objective, CycleDiagnostics, EpochStats, TrainedNets,
};

use crate::diffcore::RealMatrix;
use crate::{Real, Result};

/// A window's shaped scores `Ŝ`, mixed scores `S̄` and soft selection count `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBatch<T> {
    pub shaped: RealMatrix<T>,
    pub mixed: Vec<T>,
    pub alpha: T,
}

impl<T: Real> ScoredBatch<T> {
    /// Shapes `scores` with `W = sigmoid(theta)`, mixes them and counts.
    pub fn evaluate(scores: &RealMatrix<T>, threshold: T, theta: &RealMatrix<T>, lambda: T, temperature: T) -> Result<Self> {
        let shaped = shape_scores(scores, threshold, &strategy_weights(theta))?;
        let mixed = mix_scores(&shaped, theta, lambda)?;
        let (alpha, _) = soft_select_count(&mixed, temperature);
        Ok(Self { shaped, mixed, alpha })
    }
}
