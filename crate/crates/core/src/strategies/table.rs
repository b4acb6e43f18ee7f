use std::fmt;
use std::str::FromStr;

use super::{score, PredictionBundle, ScoreContext, StrategyId};
use crate::diffcore::RealMatrix;
use crate::error::input_err;
use crate::gmixture::top_count;
use crate::{Error, Real, Result};

/// Which form of the score table feeds the threshold shaping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMode {
    /// 0/1 selection indicators.
    Binary,
    /// Min-max normalized scores in `[0, 1]`.
    #[default]
    Continuous,
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::Binary => "binary",
            ScoreMode::Continuous => "continuous",
        })
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(ScoreMode::Binary),
            "continuous" => Ok(ScoreMode::Continuous),
            _ => Err(Error::Input(format!("unknown score mode `{s}` (binary|continuous)"))),
        }
    }
}

/// Per-sample, per-strategy scores.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyScoreTable<T> {
    /// Scores as produced by each strategy.
    pub raw: RealMatrix<T>,
    /// Each column min-max normalized to `[0, 1]`; constant columns become 0.5.
    pub normalized: RealMatrix<T>,
    /// 1 for the top `ceil(t_sim * n)` samples of each column, 0 elsewhere.
    pub binary: RealMatrix<T>,
    pub order: Vec<StrategyId>,
}

impl<T: Real> StrategyScoreTable<T> {
    /// Builds the normalized and binary forms from a raw `n x K` matrix.
    pub fn from_raw(raw: RealMatrix<T>, order: Vec<StrategyId>, t_sim: f64) -> Result<Self> {
        let (n, k) = raw.shape();
        if k == 0 || order.len() != k {
            return input_err("score table needs one column per strategy");
        }
        if n == 0 {
            return input_err("score table over zero samples");
        }
        if !(t_sim > 0.0 && t_sim < 1.0) || t_sim * (n as f64) < 1.0 - 1e-9 {
            return input_err(format!("selection fraction {t_sim} selects nothing from {n} samples"));
        }
        raw.ensure_finite("strategy scores")?;
        let take = top_count(t_sim, n);
        let mut normalized = RealMatrix::zeros(n, k);
        let mut binary = RealMatrix::zeros(n, k);
        for c in 0..k {
            let col = raw.column(c);
            let lo = col.iter().copied().fold(T::infinity(), T::min);
            let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
            for (j, &v) in col.iter().enumerate() {
                normalized[(j, c)] = if hi > lo { (v - lo) / (hi - lo) } else { T::lit(0.5) };
            }
            for j in top_indices(&col, take) {
                binary[(j, c)] = T::one();
            }
        }
        Ok(Self { raw, normalized, binary, order })
    }

    pub fn len(&self) -> usize {
        self.raw.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.rows() == 0
    }

    pub fn strategies(&self) -> usize {
        self.order.len()
    }

    pub fn scores(&self, mode: ScoreMode) -> &RealMatrix<T> {
        match mode {
            ScoreMode::Binary => &self.binary,
            ScoreMode::Continuous => &self.normalized,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TableSettings {
    /// Fraction of samples each strategy marks as selected.
    pub t_sim: f64,
    /// Lloyd iteration cap for the k-means strategy; its cluster count is `ceil(t_sim * n)`.
    pub kmeans_iters: usize,
    pub seed: u64,
}

/// Evaluates `strategies` on `bundle` and assembles the score table.
pub fn build_score_table<T: Real>(
    bundle: &PredictionBundle<T>,
    strategies: &[StrategyId],
    settings: &TableSettings,
) -> Result<StrategyScoreTable<T>> {
    if strategies.is_empty() {
        return input_err("empty strategy list");
    }
    let n = bundle.len();
    if n == 0 || settings.t_sim * (n as f64) < 1.0 - 1e-9 {
        return input_err(format!("selection fraction {} selects nothing from {n} samples", settings.t_sim));
    }
    let ctx = ScoreContext {
        kmeans_clusters: top_count(settings.t_sim, n),
        kmeans_iters: settings.kmeans_iters,
        seed: settings.seed,
    };
    let mut raw = RealMatrix::zeros(n, strategies.len());
    for (c, &id) in strategies.iter().enumerate() {
        for (j, v) in score(id, bundle, &ctx)?.into_iter().enumerate() {
            raw[(j, c)] = v;
        }
    }
    StrategyScoreTable::from_raw(raw, strategies.to_vec(), settings.t_sim)
}

/// Indices of the `count` largest scores, best first; ties go to the lower index.
pub fn top_indices<T: Real>(scores: &[T], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(col: &[f64], t: f64) -> StrategyScoreTable<f64> {
        let raw = RealMatrix::from_f64(col.len(), 1, col).unwrap();
        StrategyScoreTable::from_raw(raw, vec![StrategyId::Entropy], t).unwrap()
    }

    #[test]
    fn binary_count_rule() {
        let t = single(&[0.3, 0.9, 0.1, 0.5], 0.5);
        assert_eq!(t.binary.column(0), vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column() {
        let t = single(&[2.0; 5], 0.4);
        assert_eq!(t.normalized.column(0), vec![0.5; 5]);
        assert_eq!(t.binary.column(0), vec![1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn min_max_extremes() {
        let t = single(&[-3.0, 7.0, 1.5, 0.0], 0.25);
        let col = t.normalized.column(0);
        assert_eq!(col.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(col.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn empty_strategy_list() {
        let b = PredictionBundle::new(RealMatrix::<f64>::filled(4, 2, 0.5), None, None).unwrap();
        let s = TableSettings { t_sim: 0.5, kmeans_iters: 10, seed: 0 };
        assert!(build_score_table(&b, &[], &s).is_err());
        let tiny = TableSettings { t_sim: 0.1, ..s };
        assert!(build_score_table(&b, &[StrategyId::Entropy], &tiny).is_err());
    }

    #[test]
    fn top_indices_ties_to_lower_index() {
        assert_eq!(top_indices(&[1.0, 3.0, 3.0, 2.0], 2), vec![1, 2]);
        assert_eq!(top_indices(&[0.0, 0.0, 0.0], 2), vec![0, 1]);
    }
}
