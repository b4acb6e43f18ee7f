use rand::Rng;

use super::kmeans::{lloyd, representative_scores};
use super::PredictionBundle;
use crate::diffcore::RealMatrix;
use crate::error::input_err;
use crate::{seed, Real, Result};

fn entropy_of<T: Real>(row: &[T]) -> T {
    row.iter()
        .filter(|&&p| p > T::zero())
        .fold(T::zero(), |acc, &p| acc - p * p.ln())
}

/// Shannon entropy of the predicted distribution.
pub fn score_entropy<T: Real>(bundle: &PredictionBundle<T>) -> Vec<T> {
    bundle.eval_probs.row_iter().map(entropy_of).collect()
}

/// Negated gap between the two largest class probabilities.
pub fn score_margin<T: Real>(bundle: &PredictionBundle<T>) -> Result<Vec<T>> {
    if bundle.eval_probs.cols() < 2 {
        return input_err("margin sampling needs at least two classes");
    }
    Ok(bundle
        .eval_probs
        .row_iter()
        .map(|r| {
            let (mut first, mut second) = (T::neg_infinity(), T::neg_infinity());
            for &p in r {
                if p > first {
                    second = first;
                    first = p;
                } else if p > second {
                    second = p;
                }
            }
            -(first - second)
        })
        .collect())
}

/// One minus the top class probability.
pub fn score_least_confidence<T: Real>(bundle: &PredictionBundle<T>) -> Vec<T> {
    bundle
        .eval_probs
        .row_iter()
        .map(|r| T::one() - r.iter().copied().fold(T::neg_infinity(), T::max))
        .collect()
}

/// Cluster representatives of the embeddings, see [`representative_scores`].
pub fn score_kmeans<T: Real>(bundle: &PredictionBundle<T>, k: usize, iters: usize, seed: u64) -> Result<Vec<T>> {
    let Some(emb) = &bundle.embeddings else {
        return input_err("k-means sampling needs embeddings");
    };
    let fit = lloyd(emb, k, iters, seed)?;
    Ok(representative_scores(emb, &fit))
}

fn mc_stack<T: Real>(bundle: &PredictionBundle<T>) -> Result<&[RealMatrix<T>]> {
    match &bundle.mc_probs {
        Some(s) if s.len() >= 2 => Ok(s),
        _ => input_err("strategy needs at least two Monte-Carlo dropout passes"),
    }
}

fn mc_mean<T: Real>(stack: &[RealMatrix<T>]) -> RealMatrix<T> {
    let mut mean = RealMatrix::zeros(stack[0].rows(), stack[0].cols());
    for m in stack {
        for (a, &b) in mean.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *a = *a + b;
        }
    }
    mean.scale(T::one() / T::from_count(stack.len()))
}

/// Mutual information between the prediction and the dropout posterior:
/// `H(mean_t p_t) - mean_t H(p_t)`, clamped at zero.
pub fn score_bald<T: Real>(bundle: &PredictionBundle<T>) -> Result<Vec<T>> {
    let stack = mc_stack(bundle)?;
    let mean = mc_mean(stack);
    let t = T::from_count(stack.len());
    Ok((0..mean.rows())
        .map(|j| {
            let expected: T = stack.iter().map(|m| entropy_of(m.row(j))).sum::<T>() / t;
            (entropy_of(mean.row(j)) - expected).max(T::zero())
        })
        .collect())
}

/// One minus the top class probability of the Monte-Carlo mean prediction.
pub fn score_var_ratio<T: Real>(bundle: &PredictionBundle<T>) -> Result<Vec<T>> {
    let mean = mc_mean(mc_stack(bundle)?);
    Ok(mean.row_iter().map(|r| T::one() - r.iter().copied().fold(T::neg_infinity(), T::max)).collect())
}

/// Class-averaged population standard deviation across Monte-Carlo passes.
pub fn score_mean_std<T: Real>(bundle: &PredictionBundle<T>) -> Result<Vec<T>> {
    let stack = mc_stack(bundle)?;
    let mean = mc_mean(stack);
    let t = T::from_count(stack.len());
    let p = T::from_count(mean.cols());
    Ok((0..mean.rows())
        .map(|j| {
            (0..mean.cols())
                .map(|c| {
                    let mu = mean[(j, c)];
                    let var = stack.iter().map(|m| (m[(j, c)] - mu) * (m[(j, c)] - mu)).sum::<T>() / t;
                    var.sqrt()
                })
                .sum::<T>()
                / p
        })
        .collect())
}

pub fn score_random<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = seed::stream(seed, "random-scores", 0);
    (0..n).map(|_| T::lit(rng.random::<f64>())).collect()
}
