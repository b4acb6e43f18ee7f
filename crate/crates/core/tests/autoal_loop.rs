use std::sync::Arc;

use autoal_core::autoal::{
    bilevel_train_round, mix_scores, run_active_learning, select_query, shape_scores, strategy_weights, AutoAlConfig,
    FitWeighting, Method,
};
use autoal_core::diffcore::RealMatrix;
use autoal_core::pool::{make_interleaved_blobs, DataPool};
use autoal_core::strategies::{ScoreMode, StrategyId};
use autoal_core::Dataset;
use proptest::prelude::*;

fn data() -> (Arc<Dataset>, Dataset) {
    let d = make_interleaved_blobs(&[150; 3], 2, 2, 4.0, 0.6, 21).unwrap();
    let (pool, test) = d.split_holdout(0.3, 22).unwrap();
    (Arc::new(pool), test)
}

fn quick() -> AutoAlConfig {
    AutoAlConfig { rounds: 2, budget: 20, warmup_epochs: 5, joint_epochs: 3, task_epochs: 10, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixing_is_linear_in_lambda(
        s in prop::collection::vec(0.0f64..1.0, 12), th in prop::collection::vec(-3.0f64..3.0, 12),
        threshold in 0.0f64..1.0, lambda in 0.1f64..5.0, scale in 0.1f64..20.0,
    ) {
        let s = RealMatrix::from_vec(4, 3, s).unwrap();
        let th = RealMatrix::from_vec(4, 3, th).unwrap();
        let shaped = shape_scores(&s, threshold, &strategy_weights(&th)).unwrap();
        let a = mix_scores(&shaped, &th, lambda).unwrap();
        let b = mix_scores(&shaped, &th, lambda * scale).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x * scale - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}

#[test]
fn binary_mode_and_clamped_weighting_run_the_loop() {
    let (pool, test) = data();
    for cfg in [
        AutoAlConfig { score_mode: ScoreMode::Binary, ..quick() },
        AutoAlConfig { fit_weighting: FitWeighting::Clamped, loss_pred_enabled: false, ..quick() },
        AutoAlConfig { persist_nets: true, refit_threshold: false, ..quick() },
    ] {
        let r = run_active_learning(Method::AutoAl, pool.clone(), &test, 40, &cfg, 4).unwrap();
        assert!(r.failure.is_none());
        assert_eq!(r.queries.len(), 2);
        assert!(r.diagnostics.iter().flatten().all(|c| c.all_finite() && c.fit_step_leaks == 0 && c.search_step_leaks == 0));
    }
}

#[test]
fn queries_come_from_the_unlabeled_pool_only() {
    let (data, _) = data();
    let mut pool = DataPool::init(data, 40, false, 3).unwrap();
    let cfg = quick();
    let nets = bilevel_train_round(&pool, &cfg, 1, None).unwrap();
    let out = select_query(&pool, &nets, &cfg, 2).unwrap();
    assert_eq!(out.indices.len(), cfg.budget);
    assert!(out.indices.iter().all(|&i| !pool.is_labeled(i)));
    assert_eq!(out.candidates, pool.unlabeled());
    let ranked: Vec<f64> = out.indices.iter().map(|i| out.mixed[out.candidates.binary_search(i).unwrap()]).collect();
    assert!(ranked.windows(2).all(|w| w[0] >= w[1]));
    pool.commit_query(&out.indices).unwrap();
    assert_eq!(pool.labeled_len(), 60);
}

#[test]
fn strategy_subsets_are_accepted() {
    let (pool, test) = data();
    let cfg = AutoAlConfig { candidates: vec![StrategyId::Entropy, StrategyId::KMeans], rounds: 1, ..quick() };
    let r = run_active_learning(Method::AutoAl, pool, &test, 40, &cfg, 9).unwrap();
    assert_eq!(r.strategy_scores[0].len(), 2);
    assert_eq!(r.strategy_scores[0].iter().map(|s| s.1).fold(f64::MIN, f64::max), 1.0);
}
