use std::fmt;
use std::str::FromStr;

use crate::error::input_err;
use crate::strategies::{ScoreMode, StrategyId};
use crate::{Error, Result};

/// What the score mixture is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GmmInput {
    /// Every per-sample, per-strategy score as its own observation.
    #[default]
    Pooled,
    /// One observation per sample: the sum over strategies.
    PerSampleSum,
}

impl fmt::Display for GmmInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GmmInput::Pooled => "pooled",
            GmmInput::PerSampleSum => "per_sample_sum",
        })
    }
}

impl FromStr for GmmInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(GmmInput::Pooled),
            "per_sample_sum" => Ok(GmmInput::PerSampleSum),
            _ => Err(Error::Input(format!("unknown gmm input `{s}` (pooled|per_sample_sum)"))),
        }
    }
}

/// How the detached mixed scores weight FitNet's per-sample losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitWeighting {
    /// `S̄` as is; negative scores turn into gradient ascent on those samples.
    #[default]
    Signed,
    /// `max(S̄, 0)`: samples below the threshold drop out of the FitNet update.
    Clamped,
}

impl fmt::Display for FitWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitWeighting::Signed => "signed",
            FitWeighting::Clamped => "clamped",
        })
    }
}

impl FromStr for FitWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed" => Ok(FitWeighting::Signed),
            "clamped" => Ok(FitWeighting::Clamped),
            _ => Err(Error::Input(format!("unknown fit weighting `{s}` (signed|clamped)"))),
        }
    }
}

/// Everything the strategy search and the surrounding loop need.
///
/// The epoch counts default to desk-scale values; a full-size run uses
/// `warmup_epochs = 200` and `joint_epochs = 400`. Warm-up runs on only half of the
/// labeled set, so it gets more epochs than the joint phase.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoAlConfig {
    /// Samples queried per round.
    pub budget: usize,
    pub rounds: usize,
    /// Bi-level training cycles per round, each on a fresh labeled split.
    pub cycles: usize,
    /// Scale of the sigmoid mixing.
    pub lambda: f64,
    /// Scale of the selection-count regularizer in both objectives.
    pub lambda_bar: f64,
    pub warmup_epochs: usize,
    pub joint_epochs: usize,
    /// Window size of the alternating updates; even, so ranking pairs are complete.
    pub batch_size: usize,
    /// SGD rate for SearchNet and the loss-prediction head.
    pub lr_search: f64,
    /// Adam rate for FitNet.
    pub lr_fit: f64,
    pub score_mode: ScoreMode,
    pub candidates: Vec<StrategyId>,
    /// Mixture components; `None` means one per candidate.
    pub gmm_components: Option<usize>,
    pub gmm_input: GmmInput,
    pub em_max_iters: usize,
    pub em_tol: f64,
    /// Draws from the fitted mixture per labeled sample when estimating the threshold.
    pub gmm_draws_per_labeled: usize,
    /// Fraction each strategy marks as selected; `None` uses the query ratio `t`.
    pub t_sim: Option<f64>,
    pub loss_pred_enabled: bool,
    pub fit_weighting: FitWeighting,
    /// Refit the score mixture on the unlabeled pool's table at query time instead of
    /// reusing the threshold from training.
    pub refit_threshold: bool,
    /// Ranking margin of the loss-prediction module.
    pub margin: f64,
    /// Temperature of the soft selection count.
    pub temperature: f64,
    pub mc_samples: usize,
    pub kmeans_iters: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub task_epochs: usize,
    pub task_batch_size: usize,
    pub lr_task: f64,
    /// Keep FitNet and SearchNet across rounds instead of reinitialising them.
    pub persist_nets: bool,
}

impl Default for AutoAlConfig {
    fn default() -> Self {
        Self {
            budget: 50,
            rounds: 8,
            cycles: 1,
            lambda: 1.0,
            lambda_bar: 1.0,
            warmup_epochs: 100,
            joint_epochs: 40,
            batch_size: 10,
            lr_search: 0.005,
            lr_fit: 0.005,
            score_mode: ScoreMode::Continuous,
            candidates: StrategyId::CANDIDATES.to_vec(),
            gmm_components: None,
            gmm_input: GmmInput::Pooled,
            em_max_iters: 200,
            em_tol: 1e-6,
            gmm_draws_per_labeled: 10,
            t_sim: None,
            loss_pred_enabled: true,
            fit_weighting: FitWeighting::Signed,
            refit_threshold: true,
            margin: 1.0,
            temperature: 0.1,
            mc_samples: 10,
            kmeans_iters: 20,
            hidden: vec![64, 64],
            dropout: 0.2,
            task_epochs: 100,
            task_batch_size: 32,
            lr_task: 0.005,
            persist_nets: false,
        }
    }
}

impl AutoAlConfig {
    /// Checks the settings that do not depend on pool sizes.
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return input_err("budget must be at least 1");
        }
        if self.cycles == 0 {
            return input_err("cycles must be at least 1");
        }
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return input_err(format!("batch size must be even and at least 2, got {}", self.batch_size));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("lr_search", self.lr_search),
            ("lr_fit", self.lr_fit),
            ("lr_task", self.lr_task),
            ("temperature", self.temperature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return input_err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.lambda_bar >= 0.0 && self.lambda_bar.is_finite()) || !(self.margin >= 0.0) {
            return input_err("lambda_bar and margin must be non-negative");
        }
        if self.candidates.is_empty() {
            return input_err("at least one candidate strategy is required");
        }
        if self.candidates.contains(&StrategyId::Random) {
            return input_err("random sampling is a baseline, not a candidate strategy");
        }
        let mut seen = self.candidates.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.candidates.len() {
            return input_err("candidate strategies must be distinct");
        }
        if self.candidates.iter().any(|c| c.needs_mc()) && (self.mc_samples < 2 || self.dropout <= 0.0) {
            return input_err("Monte-Carlo strategies need mc_samples >= 2 and a positive dropout rate");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return input_err("dropout must lie in [0, 1)");
        }
        if let Some(t) = self.t_sim {
            if !(t > 0.0 && t < 1.0) {
                return input_err("t_sim must lie in (0, 1)");
            }
        }
        if self.gmm_components == Some(0) || self.gmm_draws_per_labeled == 0 {
            return input_err("mixture components and draws must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return input_err("hidden layer sizes must be non-empty and positive");
        }
        if self.task_batch_size == 0 {
            return input_err("task batch size must be positive");
        }
        Ok(())
    }

    /// Checks the settings against pool sizes: seed set `seed_size`, pool size `pool_size`.
    pub fn validate_for_pool(&self, seed_size: usize, pool_size: usize) -> Result<()> {
        self.validate()?;
        if seed_size < 2 * self.batch_size {
            return input_err(format!(
                "seed set of {seed_size} is smaller than two windows of {}",
                self.batch_size
            ));
        }
        if seed_size + self.rounds * self.budget > pool_size {
            return input_err(format!(
                "{} rounds of {} exceed the {} unlabeled samples",
                self.rounds,
                self.budget,
                pool_size.saturating_sub(seed_size)
            ));
        }
        if self.query_ratio(pool_size) >= 1.0 {
            return input_err("budget must be smaller than the pool");
        }
        Ok(())
    }

    /// `t = b / (M + N)`.
    pub fn query_ratio(&self, pool_size: usize) -> f64 {
        self.budget as f64 / pool_size as f64
    }

    pub fn components(&self) -> usize {
        self.gmm_components.unwrap_or(self.candidates.len())
    }
}
