use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::diffcore::RealMatrix;
use crate::error::input_err;
use crate::{seed, Real, Result};

/// Cluster centers used by [`make_blobs`].
///
/// In two or more dimensions the centers sit evenly on a circle of radius `spread`
/// in the first two coordinates; in one dimension they are `spread` apart on a line.
pub fn blob_centers(count: usize, dim: usize, spread: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|c| {
            let mut center = vec![0.0; dim];
            if dim == 1 {
                center[0] = spread * (c as f64 - (count as f64 - 1.0) / 2.0);
            } else {
                let angle = 2.0 * PI * c as f64 / count as f64;
                center[0] = spread * angle.cos();
                center[1] = spread * angle.sin();
            }
            center
        })
        .collect()
}

/// Isotropic Gaussian clusters, `counts[c]` points for class `c`, rows shuffled.
pub fn make_blobs<T: Real>(
    counts: &[usize],
    dim: usize,
    spread: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    make_interleaved_blobs(counts, dim, 1, spread, noise, seed)
}

/// Blobs with `clusters_per_class` clusters per class. All `classes * clusters_per_class`
/// centers come from [`blob_centers`] and cluster `i` belongs to class `i % classes`, so
/// neighbouring clusters carry different labels. Class `c`'s points are dealt round-robin
/// over its clusters.
pub fn make_interleaved_blobs<T: Real>(
    counts: &[usize],
    dim: usize,
    clusters_per_class: usize,
    spread: f64,
    noise: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    let classes = counts.len();
    if classes < 2 {
        return input_err("blobs need at least 2 classes");
    }
    if counts.iter().any(|&c| c == 0) || dim == 0 || clusters_per_class == 0 {
        return input_err("every class needs at least one point and one cluster, and dim must be positive");
    }
    let centers = blob_centers(classes * clusters_per_class, dim, spread);
    let mut rng = seed::stream(seed, "blobs", 0);
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(counts.iter().sum());
    for (c, &n) in counts.iter().enumerate() {
        for j in 0..n {
            let center = &centers[(j % clusters_per_class) * classes + c];
            let point = center
                .iter()
                .map(|&m| m + noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            rows.push((point, c));
        }
    }
    rows.shuffle(&mut rng);
    let name = if clusters_per_class == 1 {
        format!("blobs-{classes}")
    } else {
        format!("blobs-{classes}x{clusters_per_class}")
    };
    assemble(name, rows, dim, classes)
}

/// Two interleaved unit half-circles, `ceil(n/2)` points in class 0 and `floor(n/2)` in class 1.
pub fn make_two_moons<T: Real>(n: usize, noise: f64, seed: u64) -> Result<Dataset<T>> {
    if n < 2 {
        return input_err("two moons need at least 2 points");
    }
    let n_upper = n.div_ceil(2);
    let n_lower = n - n_upper;
    let mut rng = seed::stream(seed, "moons", 0);
    let mut rows = Vec::with_capacity(n);
    let angle = |i: usize, count: usize| if count > 1 { PI * i as f64 / (count - 1) as f64 } else { 0.0 };
    for i in 0..n_upper {
        let a = angle(i, n_upper);
        rows.push((vec![a.cos(), a.sin()], 0));
    }
    for i in 0..n_lower {
        let a = angle(i, n_lower);
        rows.push((vec![1.0 - a.cos(), 0.5 - a.sin()], 1));
    }
    for (p, _) in rows.iter_mut() {
        for v in p.iter_mut() {
            *v += noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    rows.shuffle(&mut rng);
    assemble("moons".to_string(), rows, 2, 2)
}

fn assemble<T: Real>(name: String, rows: Vec<(Vec<f64>, usize)>, dim: usize, classes: usize) -> Result<Dataset<T>> {
    let labels = rows.iter().map(|(_, y)| *y).collect();
    let flat: Vec<f64> = rows.into_iter().flat_map(|(p, _)| p).collect();
    let features = RealMatrix::from_f64(flat.len() / dim, dim, &flat)?;
    Dataset::new(name, features, labels, classes)
}
