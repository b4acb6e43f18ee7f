//! Dataset construction for an experiment: generate or load, hold out a test split,
//! standardize.

use std::sync::Arc;

use autoal_core::pool::{load_csv, load_idx_pair, make_interleaved_blobs, make_two_moons, Standardizer};
use autoal_core::Dataset;

use crate::config::{DatasetKind, ExperimentConfig};
use crate::HarnessError;

/// Splits `points` over `classes` as evenly as possible, remainder to the low classes.
pub fn class_counts(points: usize, classes: usize) -> Vec<usize> {
    (0..classes).map(|c| points / classes + usize::from(c < points % classes)).collect()
}

/// Returns the (pool, test) pair. Generation and the split both use `data_seed`, so every
/// run seed and every method sees the same data.
pub fn load(config: &ExperimentConfig) -> Result<(Arc<Dataset>, Dataset), HarnessError> {
    let path = |p: &Option<std::path::PathBuf>, name: &str| {
        p.clone().ok_or_else(|| HarnessError::Config(format!("dataset {} needs {name}", config.dataset.name())))
    };
    let full: Dataset = match config.dataset {
        DatasetKind::Blobs => {
            let b = &config.blobs;
            make_interleaved_blobs(
                &class_counts(b.points, b.classes),
                b.dim,
                b.clusters_per_class,
                b.spread,
                b.noise,
                config.data_seed,
            )?
        }
        DatasetKind::Moons => make_two_moons(config.moons_points, config.moons_noise, config.data_seed)?,
        DatasetKind::Idx => {
            load_idx_pair(&path(&config.data_path, "data_path")?, &path(&config.labels_path, "labels_path")?)?
        }
        DatasetKind::Csv => load_csv(&path(&config.data_path, "data_path")?)?,
    };
    let (pool, test) = full.split_holdout(config.test_fraction, config.data_seed)?;
    if !config.standardize {
        return Ok((Arc::new(pool), test));
    }
    let rows: Vec<usize> = (0..pool.len()).collect();
    let scaler = Standardizer::fit(pool.features(), &rows)?;
    Ok((Arc::new(scaler.transform_dataset(&pool)), scaler.transform_dataset(&test)))
}
