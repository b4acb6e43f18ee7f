//! Experiment configuration: defaults, flat `key = value` files and CLI overrides.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use autoal_core::autoal::{FitWeighting, GmmInput, Method};
use autoal_core::strategies::StrategyId;
use autoal_core::AutoAlConfig;

use crate::HarnessError;

/// Version string written into every manifest.
pub const VERSION: &str = concat!("autoal ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Blobs,
    Moons,
    Idx,
    Csv,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Blobs => "blobs",
            DatasetKind::Moons => "moons",
            DatasetKind::Idx => "idx",
            DatasetKind::Csv => "csv",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "blobs" => Ok(DatasetKind::Blobs),
            "moons" => Ok(DatasetKind::Moons),
            "idx" => Ok(DatasetKind::Idx),
            "csv" => Ok(DatasetKind::Csv),
            _ => Err(format!("unknown dataset `{s}` (blobs|moons|idx|csv)")),
        }
    }
}

/// Parameters of the synthetic blobs dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSettings {
    pub points: usize,
    pub classes: usize,
    pub dim: usize,
    pub clusters_per_class: usize,
    pub spread: f64,
    pub noise: f64,
}

impl Default for BlobSettings {
    fn default() -> Self {
        Self { points: 2000, classes: 4, dim: 2, clusters_per_class: 2, spread: 4.0, noise: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub data_path: Option<PathBuf>,
    pub labels_path: Option<PathBuf>,
    /// Seed of dataset generation and the train/test split; fixed across run seeds.
    pub data_seed: u64,
    pub test_fraction: f64,
    /// Z-score features with statistics of the pool side of the split.
    pub standardize: bool,
    pub blobs: BlobSettings,
    pub moons_points: usize,
    pub moons_noise: f64,
    pub method: Method,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub seed_size: usize,
    pub autoal: AutoAlConfig,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut methods = vec![Method::AutoAl];
        methods.extend(StrategyId::ALL.iter().map(|&s| Method::Strategy(s)));
        Self {
            dataset: DatasetKind::Blobs,
            data_path: None,
            labels_path: None,
            data_seed: 0,
            test_fraction: 0.3,
            standardize: true,
            blobs: BlobSettings::default(),
            moons_points: 2000,
            moons_noise: 0.2,
            method: Method::AutoAl,
            methods,
            seeds: vec![0, 1, 2],
            seed_size: 40,
            autoal: AutoAlConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Every configuration key, in manifest order.
pub const KEYS: &[&str] = &[
    "dataset",
    "data_path",
    "labels_path",
    "data_seed",
    "test_fraction",
    "standardize",
    "blob_points",
    "blob_classes",
    "blob_dim",
    "blob_clusters",
    "blob_spread",
    "blob_noise",
    "moons_points",
    "moons_noise",
    "method",
    "methods",
    "seeds",
    "seed_size",
    "rounds",
    "budget",
    "cycles",
    "candidates",
    "score_mode",
    "lambda",
    "lambda_bar",
    "warmup_epochs",
    "joint_epochs",
    "batch_size",
    "lr_search",
    "lr_fit",
    "lr_task",
    "task_epochs",
    "task_batch_size",
    "hidden",
    "dropout",
    "mc_samples",
    "kmeans_iters",
    "gmm_components",
    "gmm_input",
    "em_max_iters",
    "em_tol",
    "gmm_draws",
    "t_sim",
    "temperature",
    "margin",
    "loss_pred",
    "fit_weighting",
    "refit_threshold",
    "persist_nets",
    "out",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError>
where
    T::Err: Display,
{
    value.parse::<T>().map_err(|e| HarnessError::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(HarnessError::Config(format!("{key}: expected true or false, got `{value}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, HarnessError>
where
    T::Err: Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

fn path_or_empty(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl ExperimentConfig {
    /// Sets one key from its textual value. Dashes in the key are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        let a = &mut self.autoal;
        match k {
            "dataset" => self.dataset = value.parse().map_err(HarnessError::Config)?,
            "data_path" => self.data_path = optional_path(value),
            "labels_path" => self.labels_path = optional_path(value),
            "data_seed" => self.data_seed = parse(k, value)?,
            "test_fraction" => self.test_fraction = parse(k, value)?,
            "standardize" => self.standardize = parse_bool(k, value)?,
            "blob_points" => self.blobs.points = parse(k, value)?,
            "blob_classes" => self.blobs.classes = parse(k, value)?,
            "blob_dim" => self.blobs.dim = parse(k, value)?,
            "blob_clusters" => self.blobs.clusters_per_class = parse(k, value)?,
            "blob_spread" => self.blobs.spread = parse(k, value)?,
            "blob_noise" => self.blobs.noise = parse(k, value)?,
            "moons_points" => self.moons_points = parse(k, value)?,
            "moons_noise" => self.moons_noise = parse(k, value)?,
            "method" => self.method = parse(k, value)?,
            "methods" => self.methods = parse_list(k, value)?,
            "seeds" => self.seeds = parse_list(k, value)?,
            "seed_size" => self.seed_size = parse(k, value)?,
            "rounds" => a.rounds = parse(k, value)?,
            "budget" => a.budget = parse(k, value)?,
            "cycles" => a.cycles = parse(k, value)?,
            "candidates" => a.candidates = parse_list(k, value)?,
            "score_mode" => a.score_mode = parse(k, value)?,
            "lambda" => a.lambda = parse(k, value)?,
            "lambda_bar" => a.lambda_bar = parse(k, value)?,
            "warmup_epochs" => a.warmup_epochs = parse(k, value)?,
            "joint_epochs" => a.joint_epochs = parse(k, value)?,
            "batch_size" => a.batch_size = parse(k, value)?,
            "lr_search" => a.lr_search = parse(k, value)?,
            "lr_fit" => a.lr_fit = parse(k, value)?,
            "lr_task" => a.lr_task = parse(k, value)?,
            "task_epochs" => a.task_epochs = parse(k, value)?,
            "task_batch_size" => a.task_batch_size = parse(k, value)?,
            "hidden" => a.hidden = parse_list(k, value)?,
            "dropout" => a.dropout = parse(k, value)?,
            "mc_samples" => a.mc_samples = parse(k, value)?,
            "kmeans_iters" => a.kmeans_iters = parse(k, value)?,
            "gmm_components" => a.gmm_components = if value == "auto" { None } else { Some(parse(k, value)?) },
            "gmm_input" => a.gmm_input = parse::<GmmInput>(k, value)?,
            "em_max_iters" => a.em_max_iters = parse(k, value)?,
            "em_tol" => a.em_tol = parse(k, value)?,
            "gmm_draws" => a.gmm_draws_per_labeled = parse(k, value)?,
            "t_sim" => a.t_sim = if value == "auto" { None } else { Some(parse(k, value)?) },
            "temperature" => a.temperature = parse(k, value)?,
            "margin" => a.margin = parse(k, value)?,
            "loss_pred" => a.loss_pred_enabled = parse_bool(k, value)?,
            "fit_weighting" => a.fit_weighting = parse::<FitWeighting>(k, value)?,
            "refit_threshold" => a.refit_threshold = parse_bool(k, value)?,
            "persist_nets" => a.persist_nets = parse_bool(k, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(HarnessError::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Textual value of a key, in the form [`Self::set`] accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let a = &self.autoal;
        Some(match key {
            "dataset" => self.dataset.name().to_string(),
            "data_path" => path_or_empty(&self.data_path),
            "labels_path" => path_or_empty(&self.labels_path),
            "data_seed" => self.data_seed.to_string(),
            "test_fraction" => self.test_fraction.to_string(),
            "standardize" => self.standardize.to_string(),
            "blob_points" => self.blobs.points.to_string(),
            "blob_classes" => self.blobs.classes.to_string(),
            "blob_dim" => self.blobs.dim.to_string(),
            "blob_clusters" => self.blobs.clusters_per_class.to_string(),
            "blob_spread" => self.blobs.spread.to_string(),
            "blob_noise" => self.blobs.noise.to_string(),
            "moons_points" => self.moons_points.to_string(),
            "moons_noise" => self.moons_noise.to_string(),
            "method" => self.method.to_string(),
            "methods" => join(&self.methods),
            "seeds" => join(&self.seeds),
            "seed_size" => self.seed_size.to_string(),
            "rounds" => a.rounds.to_string(),
            "budget" => a.budget.to_string(),
            "cycles" => a.cycles.to_string(),
            "candidates" => join(&a.candidates),
            "score_mode" => a.score_mode.to_string(),
            "lambda" => a.lambda.to_string(),
            "lambda_bar" => a.lambda_bar.to_string(),
            "warmup_epochs" => a.warmup_epochs.to_string(),
            "joint_epochs" => a.joint_epochs.to_string(),
            "batch_size" => a.batch_size.to_string(),
            "lr_search" => a.lr_search.to_string(),
            "lr_fit" => a.lr_fit.to_string(),
            "lr_task" => a.lr_task.to_string(),
            "task_epochs" => a.task_epochs.to_string(),
            "task_batch_size" => a.task_batch_size.to_string(),
            "hidden" => join(&a.hidden),
            "dropout" => a.dropout.to_string(),
            "mc_samples" => a.mc_samples.to_string(),
            "kmeans_iters" => a.kmeans_iters.to_string(),
            "gmm_components" => a.gmm_components.map_or_else(|| "auto".to_string(), |c| c.to_string()),
            "gmm_input" => a.gmm_input.to_string(),
            "em_max_iters" => a.em_max_iters.to_string(),
            "em_tol" => a.em_tol.to_string(),
            "gmm_draws" => a.gmm_draws_per_labeled.to_string(),
            "t_sim" => a.t_sim.map_or_else(|| "auto".to_string(), |t| t.to_string()),
            "temperature" => a.temperature.to_string(),
            "margin" => a.margin.to_string(),
            "loss_pred" => a.loss_pred_enabled.to_string(),
            "fit_weighting" => a.fit_weighting.to_string(),
            "refit_threshold" => a.refit_threshold.to_string(),
            "persist_nets" => a.persist_nets.to_string(),
            "out" => self.out.display().to_string(),
            _ => return None,
        })
    }

    /// Applies a flat `key = value` text. Blank lines and lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Config(format!("line {}: expected `key = value`", n + 1)));
            };
            self.set(key, value).map_err(|e| HarnessError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Resolved `key = value` lines for the manifest, preceded by the version.
    pub fn manifest(&self) -> String {
        let mut out = format!("version = {VERSION}\n");
        for key in KEYS {
            out.push_str(&format!("{key} = {}\n", self.get(key).unwrap_or_default()));
        }
        out
    }

    /// Checks everything that can be checked without loading data.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.methods.is_empty() {
            return bad("the method list is empty".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} outside (0, 1)", self.test_fraction));
        }
        if self.seed_size == 0 {
            return bad("seed_size must be positive".into());
        }
        match self.dataset {
            DatasetKind::Idx => {
                for (name, p) in [("data_path", &self.data_path), ("labels_path", &self.labels_path)] {
                    match p {
                        Some(p) if p.is_file() => {}
                        Some(p) => return bad(format!("{name} {} does not exist", p.display())),
                        None => return bad(format!("the idx dataset needs {name}")),
                    }
                }
            }
            DatasetKind::Csv => match &self.data_path {
                Some(p) if p.is_file() => {}
                Some(p) => return bad(format!("data_path {} does not exist", p.display())),
                None => return bad("the csv dataset needs data_path".into()),
            },
            DatasetKind::Blobs => {
                let b = &self.blobs;
                if b.classes < 2 || b.dim == 0 || b.clusters_per_class == 0 || b.points < b.classes {
                    return bad("blob settings need >= 2 classes, a positive dim and cluster count, and a point per class".into());
                }
            }
            DatasetKind::Moons => {
                if self.moons_points < 4 {
                    return bad("moons need at least 4 points".into());
                }
            }
        }
        self.autoal.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let base = ExperimentConfig::default();
        for key in KEYS {
            let mut c = base.clone();
            let v = base.get(key).unwrap();
            c.set(key, &v).unwrap_or_else(|e| panic!("{key}: {e}"));
            assert_eq!(c, base, "{key}");
        }
    }

    #[test]
    fn file_values_and_comments() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# comment\n\nrounds = 3\nlambda-bar = 0.5\nmethods = random, entropy\n").unwrap();
        assert_eq!(c.autoal.rounds, 3);
        assert_eq!(c.autoal.lambda_bar, 0.5);
        assert_eq!(c.methods, vec![Method::Strategy(StrategyId::Random), Method::Strategy(StrategyId::Entropy)]);
        assert!(c.apply_text("rounds 3").is_err());
        assert!(c.apply_text("nonsense = 1").is_err());
    }

    #[test]
    fn manifest_lists_every_key() {
        let m = ExperimentConfig::default().manifest();
        assert!(m.starts_with("version = autoal "));
        for key in KEYS {
            assert!(m.lines().any(|l| l.starts_with(&format!("{key} = "))), "{key}");
        }
    }

    #[test]
    fn unknown_method_message_lists_choices() {
        let err = ExperimentConfig::default().set("method", "coreset").unwrap_err().to_string();
        assert!(err.contains("autoal") && err.contains("entropy"));
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::default();
        c.validate().unwrap();
        c.seeds.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.dataset = DatasetKind::Csv;
        c.data_path = Some("/definitely/missing.csv".into());
        assert!(c.validate().is_err());
    }
}
