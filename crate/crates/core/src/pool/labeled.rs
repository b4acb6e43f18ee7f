use std::sync::Arc;

use rand::seq::{index, SliceRandom};

use super::Dataset;
use crate::error::input_err;
use crate::{seed, Error, Real, Result};

/// The labeled set `L` and unlabeled set `U` over one dataset, tracked by row index.
///
/// `labeled` keeps insertion order (seed set first, then each query batch);
/// `unlabeled` is kept ascending.
#[derive(Debug, Clone)]
pub struct DataPool<T> {
    dataset: Arc<Dataset<T>>,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    in_labeled: Vec<bool>,
}

/// Disjoint train/validation halves of the labeled set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPair {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl<T: Real> DataPool<T> {
    /// Draws `seed_size` rows uniformly without replacement into `L`.
    ///
    /// With `stratified`, the seed set takes `seed_size / p` rows per class (remainder
    /// spread over the lowest class ids) whenever every class has enough rows.
    pub fn init(dataset: Arc<Dataset<T>>, seed_size: usize, stratified: bool, seed: u64) -> Result<Self> {
        let n = dataset.len();
        if seed_size == 0 || seed_size >= n {
            return input_err(format!("seed size {seed_size} must lie in (0, {n})"));
        }
        let mut rng = seed::stream(seed, "seed-set", 0);
        let mut chosen = if stratified {
            stratified_draw(&dataset, seed_size, &mut rng)
        } else {
            None
        }
        .unwrap_or_else(|| index::sample(&mut rng, n, seed_size).into_vec());
        chosen.shuffle(&mut rng);
        let mut in_labeled = vec![false; n];
        for &i in &chosen {
            in_labeled[i] = true;
        }
        let unlabeled = (0..n).filter(|&i| !in_labeled[i]).collect();
        Ok(Self { dataset, labeled: chosen, unlabeled, in_labeled })
    }

    pub fn dataset(&self) -> &Arc<Dataset<T>> {
        &self.dataset
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn labeled_len(&self) -> usize {
        self.labeled.len()
    }

    pub fn unlabeled_len(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn is_labeled(&self, index: usize) -> bool {
        self.in_labeled.get(index).copied().unwrap_or(false)
    }

    /// Ground truth of a labeled row; reading an unlabeled row is refused.
    pub fn label(&self, index: usize) -> Result<usize> {
        if index >= self.dataset.len() {
            return input_err(format!("row {index} out of range"));
        }
        if !self.in_labeled[index] {
            return Err(Error::State(format!("row {index} has not been queried yet")));
        }
        Ok(self.dataset.labels()[index])
    }

    pub fn labels_of(&self, indices: &[usize]) -> Result<Vec<usize>> {
        indices.iter().map(|&i| self.label(i)).collect()
    }

    /// Random halves of `L` with sizes differing by at most one.
    pub fn split_labeled(&self, seed: u64) -> Result<SplitPair> {
        if self.labeled.len() < 2 {
            return Err(Error::State(format!("cannot split {} labeled rows", self.labeled.len())));
        }
        let mut order = self.labeled.clone();
        order.shuffle(&mut seed::stream(seed, "split", 0));
        let half = order.len().div_ceil(2);
        let validation = order.split_off(half);
        Ok(SplitPair { train: order, validation })
    }

    /// Moves the queried rows from `U` to `L`. The batch is validated as a whole before
    /// anything changes.
    pub fn commit_query(&mut self, query: &[usize]) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(query.len());
        for &i in query {
            if !seen.insert(i) {
                return input_err(format!("row {i} appears twice in the query"));
            }
            if i >= self.dataset.len() || self.in_labeled[i] {
                return input_err(format!("row {i} is not in the unlabeled pool"));
            }
        }
        for &i in query {
            self.in_labeled[i] = true;
            self.labeled.push(i);
        }
        self.unlabeled.retain(|&i| !seen.contains(&i));
        Ok(())
    }
}

fn stratified_draw<T: Real>(dataset: &Dataset<T>, size: usize, rng: &mut impl rand::Rng) -> Option<Vec<usize>> {
    let p = dataset.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); p];
    for (i, &y) in dataset.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    let (base, extra) = (size / p, size % p);
    let quota = |c: usize| base + usize::from(c < extra);
    if by_class.iter().enumerate().any(|(c, rows)| rows.len() < quota(c)) {
        return None;
    }
    let mut out = Vec::with_capacity(size);
    for (c, rows) in by_class.iter().enumerate() {
        out.extend(index::sample(rng, rows.len(), quota(c)).into_iter().map(|k| rows[k]));
    }
    Some(out)
}
