use rand::seq::SliceRandom;

use crate::diffcore::RealMatrix;
use crate::error::input_err;
use crate::{seed, Real, Result};

/// Features plus ground-truth labels.
///
/// Labels are the oracle's answers; the active learner only sees them through
/// [`super::DataPool::label`].
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    features: RealMatrix<T>,
    labels: Vec<usize>,
    num_classes: usize,
    name: String,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        name: impl Into<String>,
        features: RealMatrix<T>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return input_err(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return input_err(format!("label {bad} out of range for {num_classes} classes"));
        }
        features.ensure_finite("dataset features")?;
        Ok(Self { features, labels, num_classes, name: name.into() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &RealMatrix<T> {
        &self.features
    }

    /// Ground truth for every row. Evaluation code only; learners go through the pool.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Majority-class count over minority-class count (classes with no rows ignored).
    pub fn imbalance_ratio(&self) -> f64 {
        let counts: Vec<usize> = self.class_counts().into_iter().filter(|&c| c > 0).collect();
        match (counts.iter().max(), counts.iter().min()) {
            (Some(&hi), Some(&lo)) => hi as f64 / lo as f64,
            _ => 1.0,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            name: self.name.clone(),
        }
    }

    /// Random disjoint (train, test) partition with `test_fraction` of rows held out.
    pub fn split_holdout(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return input_err(format!("test fraction {test_fraction} outside (0, 1)"));
        }
        let n_test = ((self.len() as f64) * test_fraction).round() as usize;
        if n_test == 0 || n_test >= self.len() {
            return input_err(format!("test fraction {test_fraction} leaves an empty side"));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut seed::stream(seed, "holdout", 0));
        let (test, train) = order.split_at(n_test);
        let (mut train, mut test) = (train.to_vec(), test.to_vec());
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }

    pub(crate) fn with_features(&self, features: RealMatrix<T>) -> Self {
        debug_assert_eq!(features.rows(), self.len());
        Self { features, labels: self.labels.clone(), num_classes: self.num_classes, name: self.name.clone() }
    }
}

/// Per-dimension z-scoring with statistics taken from a chosen subset of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    mean: Vec<T>,
    scale: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    /// Fits mean and population standard deviation on `rows` of `features`.
    /// Dimensions with (near) zero spread keep unit scale.
    pub fn fit(features: &RealMatrix<T>, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return input_err("cannot standardize on zero rows");
        }
        let n = T::from_count(rows.len());
        let d = features.cols();
        let mut mean = vec![T::zero(); d];
        for &r in rows {
            for (m, &v) in mean.iter_mut().zip(features.row(r)) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); d];
        for &r in rows {
            for ((s, &v), &m) in var.iter_mut().zip(features.row(r)).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let tiny = T::lit(1e-12);
        let scale = var.into_iter().map(|s| (s / n).sqrt()).map(|s| if s > tiny { s } else { T::one() }).collect();
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, x: &RealMatrix<T>) -> RealMatrix<T> {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, &m), &s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn transform_dataset(&self, data: &Dataset<T>) -> Dataset<T> {
        data.with_features(self.transform(data.features()))
    }
}
