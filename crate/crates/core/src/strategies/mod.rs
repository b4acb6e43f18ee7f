//! Candidate acquisition functions and the per-sample strategy score table.
//!
//! Every score follows the convention "higher = more informative".

mod kmeans;
mod scores;
mod table;

use std::fmt;
use std::str::FromStr;

pub use kmeans::{lloyd, representative_scores, KMeansFit};
pub use scores::{
    score_bald, score_entropy, score_kmeans, score_least_confidence, score_margin, score_mean_std, score_random,
    score_var_ratio,
};
pub use table::{build_score_table, top_indices, ScoreMode, StrategyScoreTable, TableSettings};

use crate::diffcore::{MlpNetwork, RealMatrix};
use crate::error::input_err;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyId {
    Entropy,
    Margin,
    LeastConfidence,
    KMeans,
    Bald,
    VarRatio,
    MeanStd,
    /// Uniform random scores; a harness baseline, never an AutoAL candidate.
    Random,
}

impl StrategyId {
    /// The seven candidates mixed by the strategy search, in canonical order.
    pub const CANDIDATES: [StrategyId; 7] = [
        StrategyId::Entropy,
        StrategyId::Margin,
        StrategyId::LeastConfidence,
        StrategyId::KMeans,
        StrategyId::Bald,
        StrategyId::VarRatio,
        StrategyId::MeanStd,
    ];

    pub const ALL: [StrategyId; 8] = [
        StrategyId::Entropy,
        StrategyId::Margin,
        StrategyId::LeastConfidence,
        StrategyId::KMeans,
        StrategyId::Bald,
        StrategyId::VarRatio,
        StrategyId::MeanStd,
        StrategyId::Random,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            StrategyId::Entropy => "entropy",
            StrategyId::Margin => "margin",
            StrategyId::LeastConfidence => "least_confidence",
            StrategyId::KMeans => "kmeans",
            StrategyId::Bald => "bald",
            StrategyId::VarRatio => "var_ratio",
            StrategyId::MeanStd => "mean_std",
            StrategyId::Random => "random",
        }
    }

    /// Whether the strategy reads Monte-Carlo dropout passes.
    pub fn needs_mc(self) -> bool {
        matches!(self, StrategyId::Bald | StrategyId::VarRatio | StrategyId::MeanStd)
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for StrategyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.tag() == s)
            .ok_or_else(|| Error::Input(format!("unknown strategy `{s}`")))
    }
}

/// Model outputs over a sample set that the acquisition functions consume.
#[derive(Debug, Clone)]
pub struct PredictionBundle<T> {
    pub eval_probs: RealMatrix<T>,
    pub mc_probs: Option<Vec<RealMatrix<T>>>,
    pub embeddings: Option<RealMatrix<T>>,
}

impl<T: Real> PredictionBundle<T> {
    pub fn new(
        eval_probs: RealMatrix<T>,
        mc_probs: Option<Vec<RealMatrix<T>>>,
        embeddings: Option<RealMatrix<T>>,
    ) -> Result<Self> {
        let n = eval_probs.rows();
        let tol = T::lit(1e-9);
        let normalized = |m: &RealMatrix<T>| {
            m.row_iter()
                .all(|r| r.iter().all(|&v| v >= T::zero()) && (r.iter().copied().sum::<T>() - T::one()).abs() <= tol)
        };
        if !normalized(&eval_probs) {
            return input_err("probability rows must be non-negative and sum to 1");
        }
        if let Some(stack) = &mc_probs {
            if stack.iter().any(|m| m.shape() != eval_probs.shape() || !normalized(m)) {
                return input_err("Monte-Carlo passes must be normalized and shaped like the eval probabilities");
            }
        }
        if let Some(e) = &embeddings {
            if e.rows() != n {
                return input_err("embeddings must have one row per sample");
            }
        }
        Ok(Self { eval_probs, mc_probs, embeddings })
    }

    /// Eval probabilities, last-hidden-layer embeddings and `mc_samples` dropout passes
    /// (skipped when `mc_samples < 2`).
    pub fn from_network(net: &MlpNetwork<T>, x: &RealMatrix<T>, mc_samples: usize, seed: u64) -> Result<Self> {
        let (eval_probs, embeddings) = net.predict_with_embedding(x)?;
        let mc = if mc_samples >= 2 { Some(net.mc_dropout_predict(x, mc_samples, seed)?) } else { None };
        Ok(Self { eval_probs, mc_probs: mc, embeddings: Some(embeddings) })
    }

    pub fn len(&self) -> usize {
        self.eval_probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.eval_probs.rows() == 0
    }

    /// Permutes sample rows of every component.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            eval_probs: self.eval_probs.select_rows(rows),
            mc_probs: self.mc_probs.as_ref().map(|s| s.iter().map(|m| m.select_rows(rows)).collect()),
            embeddings: self.embeddings.as_ref().map(|e| e.select_rows(rows)),
        }
    }
}

/// Extra knobs for the strategies that need them.
#[derive(Debug, Clone, Copy)]
pub struct ScoreContext {
    pub kmeans_clusters: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
}

/// Raw (un-normalized) scores of one strategy.
pub fn score<T: Real>(id: StrategyId, bundle: &PredictionBundle<T>, ctx: &ScoreContext) -> Result<Vec<T>> {
    match id {
        StrategyId::Entropy => Ok(score_entropy(bundle)),
        StrategyId::Margin => score_margin(bundle),
        StrategyId::LeastConfidence => Ok(score_least_confidence(bundle)),
        StrategyId::KMeans => score_kmeans(bundle, ctx.kmeans_clusters, ctx.kmeans_iters, ctx.seed),
        StrategyId::Bald => score_bald(bundle),
        StrategyId::VarRatio => score_var_ratio(bundle),
        StrategyId::MeanStd => score_mean_std(bundle),
        StrategyId::Random => Ok(score_random(bundle.len(), ctx.seed)),
    }
}
