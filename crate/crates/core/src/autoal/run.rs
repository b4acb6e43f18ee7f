use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::config::AutoAlConfig;
use super::select::select_query;
use super::train::{accuracy, bilevel_train_round, new_classifier, train_classifier, CycleDiagnostics, TrainedNets};
use crate::diffcore::MlpNetwork;
use crate::gmixture::top_count;
use crate::pool::{DataPool, Dataset};
use crate::strategies::{score, top_indices, PredictionBundle, ScoreContext, StrategyId};
use crate::{seed, Error, Real, Result};

/// How queries are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    AutoAl,
    /// A single fixed strategy scored on the current task model; `Random` is the
    /// random-sampling baseline.
    Strategy(StrategyId),
}

impl Method {
    /// Every accepted method name.
    pub fn names() -> Vec<&'static str> {
        std::iter::once("autoal").chain(StrategyId::ALL.iter().map(|s| s.tag())).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::AutoAl => f.write_str("autoal"),
            Method::Strategy(id) => write!(f, "{id}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "autoal" {
            return Ok(Method::AutoAl);
        }
        s.parse::<StrategyId>().map(Method::Strategy).map_err(|_| {
            Error::Input(format!("unknown method `{s}`; valid methods: {}", Method::names().join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRow {
    pub round: usize,
    pub labeled_count: usize,
    pub test_accuracy: f64,
}

/// Wall-clock spent per phase, summed over rounds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub search_training: Duration,
    pub selection: Duration,
    pub task_training: Duration,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    /// Row 0 is the seed-set accuracy.
    pub rounds: Vec<RoundRow>,
    /// Seed set in draw order.
    pub seed_set: Vec<usize>,
    /// Query batch of every round, best first.
    pub queries: Vec<Vec<usize>>,
    /// AutoAL only: per round, each strategy's normalized contribution to the chosen batch.
    pub strategy_scores: Vec<Vec<(StrategyId, f64)>>,
    pub diagnostics: Vec<Vec<CycleDiagnostics>>,
    pub timings: PhaseTimings,
    /// Set when training diverged; the rows above are the rounds completed before that.
    pub failure: Option<String>,
}

/// Min-max normalizes one round of strategy contributions so the largest is exactly 1;
/// when all are equal every entry becomes 1.
pub fn normalize_round_scores(raw: &[(StrategyId, f64)]) -> Vec<(StrategyId, f64)> {
    let lo = raw.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = raw.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    raw.iter()
        .map(|&(id, v)| (id, if hi > lo { (v - lo) / (hi - lo) } else { 1.0 }))
        .collect()
}

fn task_accuracy<T: Real>(
    pool: &DataPool<T>,
    test: &Dataset<T>,
    config: &AutoAlConfig,
    base_seed: u64,
    round: usize,
) -> Result<(MlpNetwork<T>, f64)> {
    let data = pool.dataset();
    let tseed = seed::derive_seed(base_seed, "task", round as u64);
    let mut net = new_classifier(data.dim(), data.num_classes(), config, tseed)?;
    let l = pool.labeled();
    let x = data.features().select_rows(l);
    let y = pool.labels_of(l)?;
    train_classifier(&mut net, &x, &y, config.task_epochs, config.task_batch_size, config.lr_task, tseed)?;
    let acc = accuracy(&net, test.features(), test.labels())?;
    Ok((net, acc))
}

fn baseline_query<T: Real>(
    id: StrategyId,
    pool: &DataPool<T>,
    model: &MlpNetwork<T>,
    config: &AutoAlConfig,
    qseed: u64,
) -> Result<Vec<usize>> {
    let u = pool.unlabeled();
    let b = config.budget;
    if u.len() < b {
        return crate::error::input_err(format!("budget {b} exceeds the {} unlabeled rows", u.len()));
    }
    let scores: Vec<T> = if id == StrategyId::Random {
        crate::strategies::score_random(u.len(), qseed)
    } else {
        let x = pool.dataset().features().select_rows(u);
        let mc = if id.needs_mc() { config.mc_samples } else { 0 };
        let bundle = PredictionBundle::from_network(model, &x, mc, seed::derive_seed(qseed, "mc", 0))?;
        let ctx = ScoreContext {
            kmeans_clusters: top_count(b as f64 / u.len() as f64, u.len()),
            kmeans_iters: config.kmeans_iters,
            seed: seed::derive_seed(qseed, "kmeans", 0),
        };
        score(id, &bundle, &ctx)?
    };
    Ok(top_indices(&scores, b).into_iter().map(|j| u[j]).collect())
}

/// Runs the active-learning loop: seed-set accuracy, then `config.rounds` rounds of
/// query, label, retrain the task model from scratch and evaluate on `test`.
///
/// The seed set, task-model initialisation and minibatch order derive from `seed` only,
/// so different methods with the same seed start from identical round-0 states.
pub fn run_active_learning<T: Real>(
    method: Method,
    pool_data: Arc<Dataset<T>>,
    test: &Dataset<T>,
    seed_size: usize,
    config: &AutoAlConfig,
    seed: u64,
) -> Result<RunRecord> {
    config.validate()?;
    if let Method::AutoAl = method {
        config.validate_for_pool(seed_size, pool_data.len())?;
    } else if seed_size + config.rounds * config.budget > pool_data.len() {
        return crate::error::input_err("rounds x budget exceed the unlabeled pool");
    }
    if test.dim() != pool_data.dim() || test.is_empty() {
        return crate::error::input_err("test set must be non-empty and match the pool's feature width");
    }
    let mut pool = DataPool::init(pool_data, seed_size, false, seed::derive_seed(seed, "pool", 0))?;
    let mut record = RunRecord {
        method,
        seed,
        rounds: Vec::with_capacity(config.rounds + 1),
        seed_set: pool.labeled().to_vec(),
        queries: Vec::new(),
        strategy_scores: Vec::new(),
        diagnostics: Vec::new(),
        timings: PhaseTimings::default(),
        failure: None,
    };

    let clock = Instant::now();
    let (mut model, acc) = task_accuracy(&pool, test, config, seed, 0)?;
    record.timings.task_training += clock.elapsed();
    record.rounds.push(RoundRow { round: 0, labeled_count: pool.labeled_len(), test_accuracy: acc });

    let mut nets: Option<TrainedNets<T>> = None;
    for round in 1..=config.rounds {
        let rseed = seed::derive_seed(seed, "round", round as u64);
        let step = (|| -> Result<()> {
            let query = match method {
                Method::AutoAl => {
                    let clock = Instant::now();
                    let trained = bilevel_train_round(&pool, config, rseed, nets.take())?;
                    record.timings.search_training += clock.elapsed();
                    let clock = Instant::now();
                    let outcome = select_query(&pool, &trained, config, seed::derive_seed(rseed, "select", 0))?;
                    record.timings.selection += clock.elapsed();
                    record.strategy_scores.push(normalize_round_scores(&outcome.contributions));
                    record.diagnostics.push(trained.cycles.clone());
                    nets = Some(trained);
                    outcome.indices
                }
                Method::Strategy(id) => {
                    let clock = Instant::now();
                    let q = baseline_query(id, &pool, &model, config, seed::derive_seed(rseed, "baseline", 0))?;
                    record.timings.selection += clock.elapsed();
                    q
                }
            };
            pool.commit_query(&query)?;
            record.queries.push(query);
            let clock = Instant::now();
            let (next, acc) = task_accuracy(&pool, test, config, seed, round)?;
            record.timings.task_training += clock.elapsed();
            model = next;
            record.rounds.push(RoundRow { round, labeled_count: pool.labeled_len(), test_accuracy: acc });
            Ok(())
        })();
        match step {
            Ok(()) => {}
            Err(Error::Training(msg)) => {
                record.failure = Some(format!("round {round}: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(record)
}

/// [`run_active_learning`] with the AutoAL method.
pub fn run_autoal<T: Real>(
    pool_data: Arc<Dataset<T>>,
    test: &Dataset<T>,
    seed_size: usize,
    config: &AutoAlConfig,
    seed: u64,
) -> Result<RunRecord> {
    run_active_learning(Method::AutoAl, pool_data, test, seed_size, config, seed)
}
