use super::config::AutoAlConfig;
use super::train::{fit_threshold, mixed_scores, TrainedNets};
use crate::diffcore::RealMatrix;
use crate::error::input_err;
use crate::pool::DataPool;
use crate::scalar::sigmoid;
use crate::strategies::{build_score_table, top_indices, PredictionBundle, StrategyId, StrategyScoreTable, TableSettings};
use crate::{seed, Real, Result};

/// Output of [`select_query`].
#[derive(Debug, Clone)]
pub struct QueryOutcome<T> {
    /// Chosen pool row indices, best first.
    pub indices: Vec<usize>,
    /// The unlabeled rows the scores below refer to, ascending.
    pub candidates: Vec<usize>,
    /// `S̄` for every candidate row.
    pub mixed: Vec<T>,
    pub table: StrategyScoreTable<T>,
    /// SearchNet logits `Θ` for every candidate row.
    pub theta: RealMatrix<T>,
    pub threshold: T,
    /// Per strategy: mean of `sigmoid(Θ_κ) * Ŝ_κ` over the chosen rows.
    pub contributions: Vec<(StrategyId, f64)>,
}

/// Scores every unlabeled row with the candidate strategies (on FitNet's predictions),
/// mixes them through SearchNet and returns the `budget` highest `S̄`, ties to the lower
/// row index.
pub fn select_query<T: Real>(
    pool: &DataPool<T>,
    nets: &TrainedNets<T>,
    config: &AutoAlConfig,
    seed: u64,
) -> Result<QueryOutcome<T>> {
    let u = pool.unlabeled();
    let b = config.budget;
    if u.len() < b {
        return input_err(format!("budget {b} exceeds the {} unlabeled rows", u.len()));
    }
    if nets.search.strategies() != config.candidates.len() {
        return input_err("SearchNet width does not match the candidate list");
    }
    let data = pool.dataset();
    let x = data.features().select_rows(u);
    let t = config.query_ratio(data.len());
    let bundle = PredictionBundle::from_network(&nets.fitnet, &x, config.mc_samples, seed::derive_seed(seed, "mc", 0))?;
    let settings = TableSettings {
        t_sim: config.t_sim_or(t).max(1.0 / u.len() as f64),
        kmeans_iters: config.kmeans_iters,
        seed: seed::derive_seed(seed, "table", 0),
    };
    let table = build_score_table(&bundle, &config.candidates, &settings)?;
    let threshold = if config.refit_threshold {
        let draws = config.gmm_draws_per_labeled * pool.labeled_len();
        fit_threshold(&table, config, t, draws, seed::derive_seed(seed, "threshold", 0))?.2
    } else {
        nets.threshold
    };
    let theta = nets.search.strategy_logits(&x)?;
    let scores = table.scores(config.score_mode);
    let mixed = mixed_scores(scores, threshold, &theta, T::lit(config.lambda))?;
    let chosen = top_indices(&mixed, b);

    let contributions = config
        .candidates
        .iter()
        .enumerate()
        .map(|(kk, &id)| {
            let total: f64 = chosen
                .iter()
                .map(|&j| {
                    let w = sigmoid(theta[(j, kk)]);
                    (w * (scores[(j, kk)] - threshold) * w).as_f64()
                })
                .sum();
            (id, total / b as f64)
        })
        .collect();
    Ok(QueryOutcome {
        indices: chosen.iter().map(|&j| u[j]).collect(),
        candidates: u.to_vec(),
        mixed,
        table,
        theta,
        threshold,
        contributions,
    })
}
