use rand::Rng;

use crate::diffcore::RealMatrix;
use crate::error::input_err;
use crate::{seed, Real, Result};

#[derive(Debug, Clone)]
pub struct KMeansFit<T> {
    pub centroids: RealMatrix<T>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid after each assignment step.
    pub objective_trace: Vec<T>,
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Lloyd's algorithm with k-means++ seeding. Runs until assignments stop changing or
/// `max_iters` assignment steps have been made.
pub fn lloyd<T: Real>(points: &RealMatrix<T>, k: usize, max_iters: usize, seed: u64) -> Result<KMeansFit<T>> {
    let n = points.rows();
    if k == 0 || k > n {
        return input_err(format!("cannot form {k} clusters from {n} points"));
    }
    let mut rng = seed::stream(seed, "kmeans", 0);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut objective = T::zero();
        for i in 0..n {
            let (best, d) = nearest(points.row(i), &centroids);
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
            objective = objective + d;
        }
        trace.push(objective);
        if !changed {
            break;
        }
        let d = points.cols();
        let mut sums = RealMatrix::<T>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignments[i];
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s = *s + v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = T::one() / T::from_count(counts[c]);
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            } else {
                // empty cluster: move it onto the point worst served by its centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(points.row(a), centroids.row(assignments[a]));
                        let db = sq_dist(points.row(b), centroids.row(assignments[b]));
                        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                centroids.row_mut(c).copy_from_slice(points.row(far));
            }
        }
    }
    Ok(KMeansFit { centroids, assignments, objective_trace: trace })
}

/// Index and squared distance of the nearest centroid, ties to the lower index.
fn nearest<T: Real>(p: &[T], centroids: &RealMatrix<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for c in 0..centroids.rows() {
        let d = sq_dist(p, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds<T: Real>(points: &RealMatrix<T>, k: usize, rng: &mut impl Rng) -> RealMatrix<T> {
    let n = points.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0])).as_f64()).collect();
    let mut taken = vec![false; n];
    taken[chosen[0]] = true;
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| (0..n).rev().find(|&i| d2[i] > 0.0).unwrap())
        } else {
            // all remaining points coincide with a chosen seed
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        taken[pick] = true;
        chosen.push(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)).as_f64());
        }
    }
    points.select_rows(&chosen)
}

/// Scores cluster representatives: for every cluster, its assigned point closest to the
/// centroid gets `1 / (1 + distance)`; every other point scores 0.
pub fn representative_scores<T: Real>(points: &RealMatrix<T>, fit: &KMeansFit<T>) -> Vec<T> {
    let k = fit.centroids.rows();
    let mut best: Vec<Option<(usize, T)>> = vec![None; k];
    for (i, &c) in fit.assignments.iter().enumerate() {
        let d = sq_dist(points.row(i), fit.centroids.row(c));
        match best[c] {
            Some((_, bd)) if bd <= d => {}
            _ => best[c] = Some((i, d)),
        }
    }
    let mut scores = vec![T::zero(); points.rows()];
    for (i, d) in best.into_iter().flatten() {
        scores[i] = T::one() / (T::one() + d.sqrt());
    }
    scores
}
