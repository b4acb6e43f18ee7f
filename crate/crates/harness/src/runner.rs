//! Runs (method, seed) jobs in parallel and writes their artifacts.

use std::fs;
use std::path::Path;

use autoal_core::autoal::{run_active_learning, Method, RunRecord};
use autoal_core::Dataset;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::data;
use crate::output::{aggregate, round_entries, write_compare, write_rounds, write_strategy_scores};
use crate::HarnessError;

pub const MANIFEST: &str = "manifest.txt";
pub const ROUNDS: &str = "rounds.csv";
pub const STRATEGY_SCORES: &str = "strategy_scores.csv";
pub const COMPARE: &str = "compare.csv";

/// Every (method, seed) pair, results in input order.
pub fn run_jobs(
    methods: &[Method],
    config: &ExperimentConfig,
    pool: &std::sync::Arc<Dataset>,
    test: &Dataset,
) -> Result<Vec<RunRecord>, HarnessError> {
    let jobs: Vec<(Method, u64)> =
        methods.iter().flat_map(|&m| config.seeds.iter().map(move |&s| (m, s))).collect();
    jobs.par_iter()
        .map(|&(method, seed)| {
            let r = run_active_learning(method, pool.clone(), test, config.seed_size, &config.autoal, seed)?;
            let last = r.rounds.last().map_or(f64::NAN, |row| row.test_accuracy);
            log::info!(
                "{method} seed {seed}: {} rounds, final accuracy {last:.4}, search {:.1}s, selection {:.1}s, task {:.1}s",
                r.rounds.len() - 1,
                r.timings.search_training.as_secs_f64(),
                r.timings.selection.as_secs_f64(),
                r.timings.task_training.as_secs_f64(),
            );
            Ok(r)
        })
        .collect()
}

/// Checks the configuration, including the constraints that depend on the pool size.
pub fn check(config: &ExperimentConfig, methods: &[Method]) -> Result<(), HarnessError> {
    config.validate()?;
    let (pool, _) = data::load(config)?;
    let a = &config.autoal;
    if methods.contains(&Method::AutoAl) {
        a.validate_for_pool(config.seed_size, pool.len())?;
    } else if config.seed_size + a.rounds * a.budget > pool.len() {
        return Err(HarnessError::Config(format!(
            "seed_size {} + rounds {} x budget {} exceeds the {}-row pool",
            config.seed_size,
            a.rounds,
            a.budget,
            pool.len()
        )));
    }
    Ok(())
}

fn write_run_dir(dir: &Path, config: &ExperimentConfig, method: Method, records: &[RunRecord]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let mut resolved = config.clone();
    resolved.method = method;
    fs::write(dir.join(MANIFEST), resolved.manifest())?;
    write_rounds(&dir.join(ROUNDS), records)?;
    if method == Method::AutoAl {
        write_strategy_scores(&dir.join(STRATEGY_SCORES), records)?;
    }
    Ok(())
}

fn divergence(records: &[RunRecord]) -> Result<(), HarnessError> {
    let failed: Vec<String> = records
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|f| format!("{} seed {}: {f}", r.method, r.seed)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Diverged(failed.join("; ")))
    }
}

/// `run`: one method over every seed, artifacts directly under `out`.
pub fn run(config: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    check(config, &[config.method])?;
    let (pool, test) = data::load(config)?;
    let records = run_jobs(&[config.method], config, &pool, &test)?;
    write_run_dir(&config.out, config, config.method, &records)?;
    divergence(&records)?;
    Ok(records)
}

/// `compare`: every method over every seed, one subdirectory per method plus the
/// aggregated comparison.
pub fn compare(config: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    check(config, &config.methods)?;
    let (pool, test) = data::load(config)?;
    let records = run_jobs(&config.methods, config, &pool, &test)?;
    fs::create_dir_all(&config.out)?;
    for &m in &config.methods {
        let mine: Vec<RunRecord> = records.iter().filter(|r| r.method == m).cloned().collect();
        write_run_dir(&config.out.join(m.to_string()), config, m, &mine)?;
    }
    fs::write(config.out.join(MANIFEST), config.manifest())?;
    write_compare(&config.out.join(COMPARE), &aggregate(&round_entries(&records)))?;
    divergence(&records)?;
    Ok(records)
}
