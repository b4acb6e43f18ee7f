use super::RealMatrix;
use crate::error::{input_err, shape_err};
use crate::{Real, Result};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Row-wise softmax, stabilised by subtracting each row's maximum.
pub fn softmax_rows<T: Real>(logits: &RealMatrix<T>) -> Result<RealMatrix<T>> {
    logits.ensure_finite("logits")?;
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total = total + *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    Ok(out)
}

/// Per-sample cross-entropy `-ln p[j, y_j]` and its arithmetic mean.
pub fn cross_entropy<T: Real>(probs: &RealMatrix<T>, labels: &[usize]) -> Result<(Vec<T>, T)> {
    if probs.rows() != labels.len() {
        return shape_err(format!("{} probability rows but {} labels", probs.rows(), labels.len()));
    }
    if probs.rows() == 0 {
        return input_err("cross-entropy of an empty batch");
    }
    let floor = T::lit(PROB_FLOOR);
    let mut losses = Vec::with_capacity(labels.len());
    for (j, &y) in labels.iter().enumerate() {
        if y >= probs.cols() {
            return input_err(format!("label {y} out of range for {} classes", probs.cols()));
        }
        losses.push(-probs[(j, y)].max(floor).ln());
    }
    let mean = losses.iter().copied().sum::<T>() / T::from_count(losses.len());
    Ok((losses, mean))
}

/// Gradient of `sum_j w_j * CE_j` with respect to the logits: `w_j (p_j - onehot(y_j))`.
///
/// Exact while `p[j, y_j]` stays above the probability floor.
pub fn weighted_ce_logit_grad<T: Real>(
    probs: &RealMatrix<T>,
    labels: &[usize],
    weights: &[T],
) -> Result<RealMatrix<T>> {
    if probs.rows() != labels.len() || labels.len() != weights.len() {
        return shape_err("probabilities, labels and weights disagree in length");
    }
    let mut grad = probs.clone();
    for (j, (&y, &w)) in labels.iter().zip(weights).enumerate() {
        if y >= probs.cols() {
            return input_err(format!("label {y} out of range for {} classes", probs.cols()));
        }
        let row = grad.row_mut(j);
        row[y] = row[y] - T::one();
        for v in row.iter_mut() {
            *v = *v * w;
        }
    }
    Ok(grad)
}

pub fn argmax_rows<T: Real>(m: &RealMatrix<T>) -> Vec<usize> {
    m.row_iter()
        .map(|r| {
            let mut best = 0;
            for (c, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetric_row() {
        let p = softmax_rows(&RealMatrix::<f64>::zeros(1, 2)).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_large_logit_does_not_overflow() {
        let p = softmax_rows(&RealMatrix::<f64>::from_f64(1, 2, &[1000.0, 0.0]).unwrap()).unwrap();
        assert!(p.is_finite());
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(p[(0, 1)] < 1e-300 || p[(0, 1)] == 0.0);
    }

    #[test]
    fn softmax_matches_direct_exponentials() {
        let p = softmax_rows(&RealMatrix::<f64>::from_f64(1, 3, &[1.0, 2.0, 3.0]).unwrap()).unwrap();
        let z: f64 = [1f64, 2., 3.].iter().map(|v| v.exp()).sum();
        for (c, v) in [1f64, 2., 3.].iter().enumerate() {
            assert!((p[(0, c)] - v.exp() / z).abs() < 1e-15);
        }
        // 0.09003057, 0.24472847, 0.66524096
        assert!((p[(0, 2)] - 0.665_240_955_774_821_6).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_nan() {
        let m = RealMatrix::<f64>::from_f64(1, 2, &[f64::NAN, 0.0]).unwrap();
        assert!(softmax_rows(&m).is_err());
    }

    #[test]
    fn cross_entropy_spot_values() {
        let perfect = RealMatrix::<f64>::from_f64(1, 2, &[1.0, 0.0]).unwrap();
        assert_eq!(cross_entropy(&perfect, &[0]).unwrap().1, 0.0);

        let uniform = RealMatrix::<f64>::filled(3, 5, 0.2);
        let (per, mean) = cross_entropy(&uniform, &[0, 3, 4]).unwrap();
        assert!(per.iter().all(|&l| (l - 5f64.ln()).abs() < 1e-12));
        assert!((mean - 5f64.ln()).abs() < 1e-12);

        let row = RealMatrix::<f64>::from_f64(1, 3, &[0.7, 0.2, 0.1]).unwrap();
        assert!((cross_entropy(&row, &[1]).unwrap().1 - 1.609_437_912_434_100_3).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_floors_zero_probability() {
        let m = RealMatrix::<f64>::from_f64(1, 2, &[1.0, 0.0]).unwrap();
        let (per, _) = cross_entropy(&m, &[1]).unwrap();
        assert!((per[0] + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let m = RealMatrix::<f64>::filled(1, 2, 0.5);
        assert!(matches!(cross_entropy(&m, &[2]), Err(crate::Error::Input(_))));
    }
}
