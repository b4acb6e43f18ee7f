//! Score shaping, sigmoid mixing, the selection-count regularizer and the two
//! alternating training objectives, each with its analytic derivative.

use rand::seq::SliceRandom;

use crate::diffcore::RealMatrix;
use crate::error::{input_err, shape_err};
use crate::scalar::sigmoid;
use crate::{seed, Real, Result};

/// `(S - threshold) * W`, element-wise.
pub fn shape_scores<T: Real>(scores: &RealMatrix<T>, threshold: T, weights: &RealMatrix<T>) -> Result<RealMatrix<T>> {
    if scores.shape() != weights.shape() {
        return shape_err(format!(
            "scores are {}x{} but strategy weights are {}x{}",
            scores.rows(),
            scores.cols(),
            weights.rows(),
            weights.cols()
        ));
    }
    scores.zip_with(weights, |s, w| (s - threshold) * w)
}

/// `S̄_j = sum_k lambda * sigmoid(theta[j, k]) * shaped[j, k]`.
pub fn mix_scores<T: Real>(shaped: &RealMatrix<T>, theta: &RealMatrix<T>, lambda: T) -> Result<Vec<T>> {
    if shaped.shape() != theta.shape() {
        return shape_err("shaped scores and strategy logits disagree in shape");
    }
    Ok(shaped
        .row_iter()
        .zip(theta.row_iter())
        .map(|(s, th)| s.iter().zip(th).map(|(&v, &t)| lambda * sigmoid(t) * v).sum())
        .collect())
}

/// Strategy weights `W = sigmoid(theta)`.
pub fn strategy_weights<T: Real>(theta: &RealMatrix<T>) -> RealMatrix<T> {
    theta.map(sigmoid)
}

/// Mixed scores when the shaping weights are themselves `sigmoid(theta)`, i.e.
/// `S̄_j = lambda * sum_k sigmoid(theta)^2 (S - threshold)`, together with
/// `dS̄_j / dtheta[j, k] = 2 lambda sigmoid^2 (1 - sigmoid) (S - threshold)`.
pub fn mixed_scores_with_grad<T: Real>(
    scores: &RealMatrix<T>,
    threshold: T,
    theta: &RealMatrix<T>,
    lambda: T,
) -> Result<(Vec<T>, RealMatrix<T>)> {
    let weights = strategy_weights(theta);
    let shaped = shape_scores(scores, threshold, &weights)?;
    let mixed = mix_scores(&shaped, theta, lambda)?;
    let two = T::lit(2.0);
    let grad = scores.zip_with(&weights, |s, w| two * lambda * w * w * (T::one() - w) * (s - threshold))?;
    Ok((mixed, grad))
}

/// Differentiable count of positively scored samples, `sum_j sigmoid(S̄_j / temperature)`,
/// and its derivative with respect to each `S̄_j`.
pub fn soft_select_count<T: Real>(mixed: &[T], temperature: T) -> (T, Vec<T>) {
    let mut count = T::zero();
    let grad = mixed
        .iter()
        .map(|&s| {
            let p = sigmoid(s / temperature);
            count = count + p;
            p * (T::one() - p) / temperature
        })
        .collect();
    (count, grad)
}

/// `1 / (1 + exp(0.5 |alpha - t B|)) - 0.5`.
pub fn regularization_loss<T: Real>(alpha: T, t: T, batch: usize) -> T {
    let dev = (alpha - t * T::from_count(batch)).abs();
    T::one() / (T::one() + (T::lit(0.5) * dev).exp()) - T::lit(0.5)
}

/// Derivative of [`regularization_loss`] with respect to `alpha` (zero at the apex).
pub fn regularization_grad<T: Real>(alpha: T, t: T, batch: usize) -> T {
    let d = alpha - t * T::from_count(batch);
    if d == T::zero() {
        return T::zero();
    }
    let f = T::one() / (T::one() + (T::lit(0.5) * d.abs()).exp());
    -T::lit(0.5) * d.signum() * f * (T::one() - f)
}

/// FitNet objective: `mean_j(S̄_detached_j * loss_j) + lambda_bar * reg`.
///
/// The mixed scores enter as constants, so the only parameters that move are the ones
/// producing `losses`; `reg` is computed from detached scores and adds no gradient.
pub fn fitnet_loss<T: Real>(losses: &[T], mixed_detached: &[T], lambda_bar: T, reg: T) -> Result<T> {
    if losses.len() != mixed_detached.len() || losses.is_empty() {
        return input_err("losses and mixed scores must be non-empty and equally long");
    }
    let n = T::from_count(losses.len());
    Ok(losses.iter().zip(mixed_detached).map(|(&l, &s)| s * l).sum::<T>() / n + lambda_bar * reg)
}

/// SearchNet objective: `-mean_j(S̄_j * loss_detached_j) - lambda_bar * reg`.
pub fn searchnet_loss<T: Real>(losses_detached: &[T], mixed: &[T], lambda_bar: T, reg: T) -> Result<T> {
    if losses_detached.len() != mixed.len() || mixed.is_empty() {
        return input_err("losses and mixed scores must be non-empty and equally long");
    }
    let n = T::from_count(mixed.len());
    Ok(-(losses_detached.iter().zip(mixed).map(|(&l, &s)| s * l).sum::<T>() / n) - lambda_bar * reg)
}

/// `dL_S / dS̄_j` including the regularizer's path through the soft count.
pub fn searchnet_loss_grad<T: Real>(
    losses_detached: &[T],
    mixed: &[T],
    lambda_bar: T,
    t: T,
    temperature: T,
) -> Vec<T> {
    let n = T::from_count(mixed.len());
    let (alpha, dalpha) = soft_select_count(mixed, temperature);
    let dreg = regularization_grad(alpha, t, mixed.len());
    losses_detached
        .iter()
        .zip(&dalpha)
        .map(|(&l, &da)| -l / n - lambda_bar * dreg * da)
        .collect()
}

/// Pairs `(perm[i], perm[i + n/2])` from a seeded shuffle of `0..n`.
pub fn shuffled_pairs(n: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if n < 2 || n % 2 != 0 {
        return input_err(format!("ranking pairs need an even batch, got {n}"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::stream(seed, "rank-pairs", 0));
    let half = n / 2;
    Ok((0..half).map(|i| (perm[i], perm[i + half])).collect())
}

/// Pairwise ranking loss of the loss-prediction module:
/// `mean over pairs of max(0, -sign(l_i - l_j) (p_i - p_j) + margin)`, with its
/// gradient with respect to the predictions.
pub fn loss_prediction_loss<T: Real>(
    predicted: &[T],
    actual_detached: &[T],
    pairs: &[(usize, usize)],
    margin: T,
) -> Result<(T, Vec<T>)> {
    if predicted.len() != actual_detached.len() {
        return shape_err("predicted and actual losses disagree in length");
    }
    if pairs.is_empty() {
        return input_err("no pairs to rank");
    }
    let mut grad = vec![T::zero(); predicted.len()];
    let mut total = T::zero();
    let inv = T::one() / T::from_count(pairs.len());
    for &(i, j) in pairs {
        let diff = actual_detached[i] - actual_detached[j];
        let sign = if diff > T::zero() {
            T::one()
        } else if diff < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        let hinge = -sign * (predicted[i] - predicted[j]) + margin;
        if hinge > T::zero() {
            total = total + hinge;
            grad[i] = grad[i] - sign * inv;
            grad[j] = grad[j] + sign * inv;
        }
    }
    Ok((total * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> RealMatrix<f64> {
        RealMatrix::from_f64(rows, cols, v).unwrap()
    }

    #[test]
    fn shaping_spot_values() {
        let s = m(1, 1, &[1.0]);
        let w = m(1, 1, &[0.8]);
        assert!((shape_scores(&s, 0.3, &w).unwrap()[(0, 0)] - 0.56).abs() < 1e-12);
        let at = m(2, 2, &[0.4; 4]);
        assert!(shape_scores(&at, 0.4, &m(2, 2, &[0.7; 4])).unwrap().as_slice().iter().all(|&v| v == 0.0));
        let zero_w = shape_scores(&m(1, 2, &[5.0, -3.0]), 0.1, &m(1, 2, &[0.0, 0.0])).unwrap();
        assert!(zero_w.as_slice().iter().all(|&v| v == 0.0));
        assert!(shape_scores(&s, 0.3, &m(1, 2, &[0.5, 0.5])).is_err());
    }

    #[test]
    fn mixing_rules() {
        let shaped = m(2, 3, &[0.1, -0.2, 0.4, 1.0, 2.0, -0.5]);
        let zero = RealMatrix::zeros(2, 3);
        let s = mix_scores(&shaped, &zero, 1.0).unwrap();
        assert!((s[0] - 0.5 * 0.3).abs() < 1e-15 && (s[1] - 0.5 * 2.5).abs() < 1e-15);
        let doubled = mix_scores(&shaped, &zero, 2.0).unwrap();
        assert!(s.iter().zip(&doubled).all(|(a, b)| (2.0 * a - b).abs() < 1e-15));
        let saturated = mix_scores(&m(1, 1, &[0.7]), &m(1, 1, &[50.0]), 3.0).unwrap();
        assert!((saturated[0] - 2.1).abs() < 1e-12);
    }

    #[test]
    fn soft_count_rules() {
        assert_eq!(soft_select_count(&[0.0; 6], 0.1).0, 3.0);
        assert!((soft_select_count(&[50.0f64; 4], 0.1).0 - 4.0).abs() < 1e-12);
        let (base, grad) = soft_select_count(&[0.01, -0.3, 0.2], 0.1);
        assert!(grad.iter().all(|&g| g > 0.0));
        assert!(soft_select_count(&[0.02, -0.3, 0.2], 0.1).0 > base);
    }

    #[test]
    fn regularizer_values() {
        assert_eq!(regularization_loss(3.0, 0.5, 6), 0.0);
        let expected = 1.0 / (1.0 + 1f64.exp()) - 0.5;
        assert!((regularization_loss(5.0, 0.5, 6) - expected).abs() < 1e-12);
        assert!((regularization_loss(5.0f64, 0.5, 6) + 0.231_058_578_630_005).abs() < 1e-12);
        assert_eq!(regularization_loss(3.7, 0.5, 6), regularization_loss(2.3, 0.5, 6));
        assert!(regularization_loss(1e4, 0.5, 6) > -0.5 - 1e-12);
        assert!((regularization_loss(1e4f64, 0.5, 6) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn regularizer_grad_matches_difference_quotient() {
        for alpha in [0.3f64, 2.0, 4.5, 9.0] {
            let h = 1e-6;
            let fd = (regularization_loss(alpha + h, 0.5, 6) - regularization_loss(alpha - h, 0.5, 6)) / (2.0 * h);
            assert!((fd - regularization_grad(alpha, 0.5, 6)).abs() < 1e-8);
        }
    }

    #[test]
    fn fitnet_loss_cases() {
        let losses = [0.2f64, 1.4, 0.9];
        let plain = fitnet_loss(&losses, &[1.0; 3], 0.0, -0.3).unwrap();
        assert!((plain - 2.5 / 3.0).abs() < 1e-15);
        assert_eq!(fitnet_loss(&losses, &[0.0; 3], 2.0, -0.1).unwrap(), -0.2);
    }

    #[test]
    fn searchnet_gradient_pushes_all_up_for_uniform_losses() {
        let g = searchnet_loss_grad(&[0.7f64; 4], &[0.1, -0.2, 0.3, 0.0], 0.0, 0.1, 0.1);
        assert!(g.iter().all(|&v| v < 0.0 && (v - g[0]).abs() < 1e-15));
    }

    #[test]
    fn ranking_loss_cases() {
        let pairs = [(0, 1)];
        assert_eq!(loss_prediction_loss(&[3.0, 1.0], &[2.0, 0.5], &pairs, 1.0).unwrap().0, 0.0);
        assert_eq!(loss_prediction_loss(&[0.4, 0.4], &[2.0, 0.5], &pairs, 0.7).unwrap().0, 0.7);
        assert_eq!(loss_prediction_loss(&[0.0, 1.0], &[2.0, 0.5], &pairs, 1.0).unwrap().0, 2.0);
    }

    #[test]
    fn shuffled_pairs_cover_batch() {
        let pairs = shuffled_pairs(8, 4).unwrap();
        let mut seen: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
        assert!(shuffled_pairs(7, 0).is_err());
    }
}
