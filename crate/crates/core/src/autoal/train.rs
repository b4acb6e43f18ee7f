use rand::seq::SliceRandom;

use super::config::{AutoAlConfig, FitWeighting, GmmInput};
use super::head::{ObjectiveScales, SearchBatch, SearchHead};
use super::objective::{fitnet_loss, mix_scores, regularization_loss, shape_scores, shuffled_pairs, soft_select_count, strategy_weights};
use crate::diffcore::{
    cross_entropy, fingerprint, softmax_rows, weighted_ce_logit_grad, Activation, Gradients, MlpNetwork, Mode,
    OptimizerState, RealMatrix,
};
use crate::gmixture::{threshold_top_t, EmSettings, FitReport, GaussianMixture};
use crate::pool::DataPool;
use crate::strategies::{build_score_table, PredictionBundle, StrategyScoreTable, TableSettings};
use crate::{seed, Error, Real, Result};

/// Fresh classifier `input -> hidden -> classes` with the configured dropout.
pub fn new_classifier<T: Real>(input_dim: usize, classes: usize, config: &AutoAlConfig, seed: u64) -> Result<MlpNetwork<T>> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(&config.hidden);
    dims.push(classes);
    MlpNetwork::new(&dims, Activation::Tanh, config.dropout, seed)
}

/// Sample-weighted cross-entropy `mean_j(weights_j * ce_j)` in the network's current mode,
/// with its parameter gradients. Returns the per-sample losses as well.
pub fn weighted_ce_objective<T: Real>(
    net: &mut MlpNetwork<T>,
    x: &RealMatrix<T>,
    labels: &[usize],
    weights: &[T],
) -> Result<(T, Vec<T>, Gradients<T>)> {
    if weights.len() != labels.len() || labels.len() != x.rows() {
        return crate::error::shape_err("features, labels and weights disagree in length");
    }
    let (logits, tape) = net.forward(x)?;
    let probs = softmax_rows(&logits)?;
    let (losses, _) = cross_entropy(&probs, labels)?;
    let n = T::from_count(labels.len());
    let loss = losses.iter().zip(weights).map(|(&l, &w)| w * l).sum::<T>() / n;
    let scaled: Vec<T> = weights.iter().map(|&w| w / n).collect();
    let upstream = weighted_ce_logit_grad(&probs, labels, &scaled)?;
    let grads = net.backward(&tape, &upstream, None)?;
    Ok((loss, losses, grads))
}

/// FitNet objective on one window: `mean(S̄_detached * ce) + lambda_bar * reg`, where
/// `reg` is derived from the detached scores and carries no gradient.
pub fn fitnet_objective<T: Real>(
    net: &mut MlpNetwork<T>,
    x: &RealMatrix<T>,
    labels: &[usize],
    mixed_detached: &[T],
    lambda_bar: T,
    reg: T,
) -> Result<(T, Gradients<T>)> {
    let (_, losses, grads) = weighted_ce_objective(net, x, labels, mixed_detached)?;
    Ok((fitnet_loss(&losses, mixed_detached, lambda_bar, reg)?, grads))
}

/// Minibatch Adam on plain cross-entropy. Returns the mean loss of every epoch.
pub fn train_classifier<T: Real>(
    net: &mut MlpNetwork<T>,
    x: &RealMatrix<T>,
    labels: &[usize],
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut opt = OptimizerState::adam(learning_rate)?;
    train_with(net, &mut opt, x, labels, epochs, batch_size, seed)
}

fn train_with<T: Real>(
    net: &mut MlpNetwork<T>,
    opt: &mut OptimizerState<T>,
    x: &RealMatrix<T>,
    labels: &[usize],
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = x.rows();
    if n == 0 || batch_size == 0 {
        return crate::error::input_err("training needs samples and a positive batch size");
    }
    net.set_mode(Mode::Train);
    let mut rng = seed::stream(seed, "minibatch", 0);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let xb = x.select_rows(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let ones = vec![T::one(); chunk.len()];
            let (loss, _, grads) = weighted_ce_objective(net, &xb, &yb, &ones)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Training(format!("non-finite classifier loss at epoch {epoch}")));
            }
            opt.step(net, &grads)?;
            total += loss.as_f64() * chunk.len() as f64;
        }
        trace.push(total / n as f64);
    }
    Ok(trace)
}

/// Fraction of rows whose eval-mode argmax equals the label.
pub fn accuracy<T: Real>(net: &MlpNetwork<T>, x: &RealMatrix<T>, labels: &[usize]) -> Result<f64> {
    let pred = crate::diffcore::argmax_rows(&net.predict(x)?);
    let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len().max(1) as f64)
}

/// Mean values over the windows of one joint epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub fit_loss: f64,
    pub search_loss: f64,
    pub rank_loss: f64,
    pub alpha: f64,
    pub reg: f64,
}

/// What one training cycle did.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleDiagnostics {
    pub warmup_losses: Vec<f64>,
    pub epochs: Vec<EpochStats>,
    pub threshold: f64,
    pub gmm: FitReport,
    pub fit_steps: usize,
    pub search_steps: usize,
    /// FitNet steps after which the SearchNet fingerprint changed.
    pub fit_step_leaks: usize,
    /// SearchNet steps after which the FitNet fingerprint changed.
    pub search_step_leaks: usize,
}

impl CycleDiagnostics {
    pub fn all_finite(&self) -> bool {
        self.warmup_losses.iter().all(|v| v.is_finite())
            && self.threshold.is_finite()
            && self
                .epochs
                .iter()
                .all(|e| [e.fit_loss, e.search_loss, e.rank_loss, e.alpha, e.reg].iter().all(|v| v.is_finite()))
    }
}

/// Networks and threshold left behind by [`bilevel_train_round`].
#[derive(Debug, Clone)]
pub struct TrainedNets<T> {
    pub search: SearchHead<T>,
    pub fitnet: MlpNetwork<T>,
    /// Selection threshold from the last cycle's mixture.
    pub threshold: T,
    pub gmm: GaussianMixture<T>,
    pub cycles: Vec<CycleDiagnostics>,
}

impl AutoAlConfig {
    pub(crate) fn scales(&self, t: f64) -> ObjectiveScales {
        ObjectiveScales {
            lambda: self.lambda,
            lambda_bar: self.lambda_bar,
            t,
            temperature: self.temperature,
            margin: self.margin,
            loss_pred: self.loss_pred_enabled,
        }
    }

    pub(crate) fn t_sim_or(&self, t: f64) -> f64 {
        self.t_sim.unwrap_or(t)
    }
}

/// Fits the score mixture on `table` and returns it with `ϑ_t`, the `ceil(t * draws)`-th
/// largest of `draws` samples from it.
pub fn fit_threshold<T: Real>(
    table: &StrategyScoreTable<T>,
    config: &AutoAlConfig,
    t: f64,
    draws: usize,
    seed: u64,
) -> Result<(GaussianMixture<T>, FitReport, T)> {
    let scores = table.scores(config.score_mode);
    let obs: Vec<T> = match config.gmm_input {
        GmmInput::Pooled => scores.as_slice().to_vec(),
        GmmInput::PerSampleSum => scores.row_iter().map(|r| r.iter().copied().sum()).collect(),
    };
    let settings = EmSettings { components: config.components(), max_iters: config.em_max_iters, tol: config.em_tol };
    let (gmm, report) = GaussianMixture::fit_em(&obs, settings, seed::derive_seed(seed, "em", 0))?;
    let samples = gmm.sample(draws, seed::derive_seed(seed, "gmm-draws", 0));
    let threshold = threshold_top_t(&samples, t)?;
    Ok((gmm, report, threshold))
}

/// Mixed scores `S̄` of a table under given strategy logits, without gradients.
pub fn mixed_scores<T: Real>(scores: &RealMatrix<T>, threshold: T, theta: &RealMatrix<T>, lambda: T) -> Result<Vec<T>> {
    let shaped = shape_scores(scores, threshold, &strategy_weights(theta))?;
    mix_scores(&shaped, theta, lambda)
}

/// One active-learning round of SearchNet/FitNet training over `config.cycles` cycles.
///
/// Each cycle splits `L` afresh; the validation half plays the unlabeled pool. FitNet is
/// warmed up on it with plain cross-entropy, the strategy score table and threshold are
/// computed from FitNet's predictions, and then the two networks alternate over windows of
/// `batch_size`: a FitNet step on window `n + 1` with detached mixed scores, followed by a
/// SearchNet step on window `n` with FitNet's detached per-sample losses.
///
/// `previous` carries networks over from an earlier round when `persist_nets` is set.
pub fn bilevel_train_round<T: Real>(
    pool: &DataPool<T>,
    config: &AutoAlConfig,
    seed: u64,
    previous: Option<TrainedNets<T>>,
) -> Result<TrainedNets<T>> {
    let data = pool.dataset();
    let m = pool.labeled_len();
    let b = config.batch_size;
    if m < 2 * b {
        return Err(Error::State(format!("{m} labeled samples cannot fill two windows of {b}")));
    }
    config.validate()?;
    let pool_size = data.len();
    let t = config.query_ratio(pool_size);
    let scales = config.scales(t);
    let k = config.candidates.len();

    let (mut search, mut fitnet) = match previous {
        Some(prev) if config.persist_nets => (prev.search, prev.fitnet),
        _ => (
            SearchHead::new(data.dim(), &config.hidden, k, seed::derive_seed(seed, "search-init", 0))?,
            new_classifier(data.dim(), data.num_classes(), config, seed::derive_seed(seed, "fit-init", 0))?,
        ),
    };
    let mut search_opt = OptimizerState::sgd(config.lr_search)?;
    let mut cycles = Vec::with_capacity(config.cycles);
    let mut last = None;

    for cycle in 0..config.cycles {
        let cseed = seed::derive_seed(seed, "cycle", cycle as u64);
        let split = pool.split_labeled(seed::derive_seed(cseed, "split", 0))?;
        let val = &split.validation;
        let x_val = data.features().select_rows(val);
        let y_val: Vec<usize> = val.iter().map(|&i| data.labels()[i]).collect();

        let mut fit_opt = OptimizerState::adam(config.lr_fit)?;
        fitnet.reseed(seed::derive_seed(cseed, "fit-dropout", 0));
        let warmup_losses = train_with(
            &mut fitnet,
            &mut fit_opt,
            &x_val,
            &y_val,
            config.warmup_epochs,
            b,
            seed::derive_seed(cseed, "warmup", 0),
        )?;

        // the validation half is small, so each strategy marks at least one sample
        let t_table = config.t_sim_or(t).max(1.0 / val.len() as f64);
        let bundle = PredictionBundle::from_network(&fitnet, &x_val, config.mc_samples, seed::derive_seed(cseed, "mc", 0))?;
        let settings = TableSettings { t_sim: t_table, kmeans_iters: config.kmeans_iters, seed: seed::derive_seed(cseed, "table", 0) };
        let table = build_score_table(&bundle, &config.candidates, &settings)?;
        let draws = config.gmm_draws_per_labeled * m;
        let (gmm, report, threshold) = fit_threshold(&table, config, t, draws, cseed)?;
        let scores = table.scores(config.score_mode);

        let windows = val.len() / b;
        let mut order: Vec<usize> = (0..val.len()).collect();
        let mut rng = seed::stream(cseed, "joint-shuffle", 0);
        let mut diag = CycleDiagnostics {
            warmup_losses,
            epochs: Vec::with_capacity(config.joint_epochs),
            threshold: threshold.as_f64(),
            gmm: report,
            fit_steps: 0,
            search_steps: 0,
            fit_step_leaks: 0,
            search_step_leaks: 0,
        };
        for epoch in 0..config.joint_epochs {
            order.shuffle(&mut rng);
            let mut sums = [0.0f64; 5];
            for n in 0..windows {
                let window = |w: usize| &order[w * b..(w + 1) * b];

                // FitNet on the next window, SearchNet frozen
                let next = window((n + 1) % windows);
                let xf = x_val.select_rows(next);
                let yf: Vec<usize> = next.iter().map(|&i| y_val[i]).collect();
                let theta = search.strategy_logits(&xf)?;
                let mixed = mixed_scores(&scores.select_rows(next), threshold, &theta, T::lit(config.lambda))?;
                let (alpha, _) = soft_select_count(&mixed, T::lit(config.temperature));
                let reg = regularization_loss(alpha, T::lit(t), b);
                let weights: Vec<T> = match config.fit_weighting {
                    FitWeighting::Signed => mixed,
                    FitWeighting::Clamped => mixed.iter().map(|&v| v.max(T::zero())).collect(),
                };
                let before = fingerprint(&search);
                let (fit_loss, grads) = fitnet_objective(&mut fitnet, &xf, &yf, &weights, T::lit(config.lambda_bar), reg)?;
                if !fit_loss.is_finite() || !grads.is_finite() {
                    return Err(divergence("FitNet", cycle, epoch, n, &diag));
                }
                fit_opt.step(&mut fitnet, &grads)?;
                diag.fit_steps += 1;
                if fingerprint(&search) != before {
                    diag.fit_step_leaks += 1;
                }

                // SearchNet on the current window, FitNet frozen
                let cur = window(n);
                let xs = x_val.select_rows(cur);
                let ys: Vec<usize> = cur.iter().map(|&i| y_val[i]).collect();
                let (losses, _) = cross_entropy(&fitnet.predict_proba(&xs)?, &ys)?;
                let pairs = shuffled_pairs(b, seed::derive_seed(cseed, "pairs", (epoch * windows + n) as u64))?;
                let s_cur = scores.select_rows(cur);
                let batch = SearchBatch { x: &xs, scores: &s_cur, threshold, losses: &losses, pairs: &pairs };
                let before = fingerprint(&fitnet);
                let (step, sgrads) = search.objective(&batch, &scales)?;
                if !step.total.is_finite() || !sgrads.is_finite() {
                    return Err(divergence("SearchNet", cycle, epoch, n, &diag));
                }
                search_opt.step(&mut search, &sgrads)?;
                diag.search_steps += 1;
                if fingerprint(&fitnet) != before {
                    diag.search_step_leaks += 1;
                }

                for (acc, v) in sums.iter_mut().zip([fit_loss, step.search_loss, step.rank_loss, step.alpha, step.reg]) {
                    *acc += v.as_f64();
                }
            }
            let w = windows as f64;
            diag.epochs.push(EpochStats {
                fit_loss: sums[0] / w,
                search_loss: sums[1] / w,
                rank_loss: sums[2] / w,
                alpha: sums[3] / w,
                reg: sums[4] / w,
            });
        }
        if !diag.all_finite() {
            return Err(Error::Training(format!("non-finite diagnostics in cycle {cycle}: {diag:?}")));
        }
        cycles.push(diag);
        last = Some((gmm, threshold));
    }
    let (gmm, threshold) = last.expect("at least one cycle");
    fitnet.set_mode(Mode::Eval);
    Ok(TrainedNets { search, fitnet, threshold, gmm, cycles })
}

fn divergence(which: &str, cycle: usize, epoch: usize, window: usize, diag: &CycleDiagnostics) -> Error {
    let last = diag.epochs.last();
    Error::Training(format!(
        "{which} loss became non-finite (cycle {cycle}, epoch {epoch}, window {window}); last epoch stats: {last:?}"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::make_blobs;
    use std::sync::Arc;

    fn blobs_pool(seed_size: usize) -> (DataPool<f64>, crate::pool::Dataset<f64>) {
        let data = make_blobs::<f64>(&[150; 4], 2, 3.0, 1.0, 3).unwrap();
        let (train, test) = data.split_holdout(0.3, 4).unwrap();
        (DataPool::init(Arc::new(train), seed_size, false, 5).unwrap(), test)
    }

    #[test]
    fn classifier_learns_blobs() {
        let (pool, test) = blobs_pool(40);
        let cfg = AutoAlConfig::default();
        let mut net = new_classifier::<f64>(2, 4, &cfg, 1).unwrap();
        let before = accuracy(&net, test.features(), test.labels()).unwrap();
        let l = pool.labeled();
        let x = pool.dataset().features().select_rows(l);
        let y = pool.labels_of(l).unwrap();
        let trace = train_classifier(&mut net, &x, &y, 100, 32, 0.005, 2).unwrap();
        assert!(trace.last().unwrap() < &trace[0]);
        assert!(accuracy(&net, test.features(), test.labels()).unwrap() > before);
    }

    #[test]
    fn round_runs_with_clean_detachment() {
        let (pool, _) = blobs_pool(40);
        let cfg = AutoAlConfig { warmup_epochs: 5, joint_epochs: 4, ..Default::default() };
        let nets = bilevel_train_round(&pool, &cfg, 11, None).unwrap();
        let d = &nets.cycles[0];
        assert_eq!(d.fit_steps, 8);
        assert_eq!(d.search_steps, 8);
        assert_eq!((d.fit_step_leaks, d.search_step_leaks), (0, 0));
        assert!(d.all_finite());
        assert_eq!(d.epochs.len(), 4);
    }

    #[test]
    fn small_labeled_set_is_a_state_error() {
        let (pool, _) = blobs_pool(19);
        assert!(matches!(bilevel_train_round(&pool, &AutoAlConfig::default(), 0, None), Err(Error::State(_))));
    }
}
