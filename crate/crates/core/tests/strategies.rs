use autoal_core::diffcore::RealMatrix;
use autoal_core::gmixture::top_count;
use autoal_core::strategies::{build_score_table, score, top_indices, PredictionBundle, ScoreContext, StrategyId, TableSettings};
use proptest::prelude::*;

fn probs(raw: &[f64], cols: usize) -> RealMatrix<f64> {
    let rows = raw.len() / cols;
    let mut m = RealMatrix::zeros(rows, cols);
    for j in 0..rows {
        let r = &raw[j * cols..(j + 1) * cols];
        let s: f64 = r.iter().sum();
        for (k, v) in r.iter().enumerate() {
            m[(j, k)] = v / s;
        }
    }
    m
}

fn bundle_strategy() -> impl Strategy<Value = PredictionBundle<f64>> {
    (2usize..6, 4usize..30).prop_flat_map(|(c, n)| {
        (prop::collection::vec(0.01f64..1.0, n * c), prop::collection::vec(prop::collection::vec(0.01f64..1.0, n * c), 3))
            .prop_map(move |(eval, mc)| {
                let stack = mc.iter().map(|m| probs(m, c)).collect();
                PredictionBundle::new(probs(&eval, c), Some(stack), None).unwrap()
            })
    })
}

const CTX: ScoreContext = ScoreContext { kmeans_clusters: 2, kmeans_iters: 10, seed: 1 };

proptest! {
    #[test]
    fn top_indices_match_a_stable_full_sort(v in prop::collection::vec(prop_oneof![Just(0.5), -1.0f64..1.0], 1..60), b in 1usize..60) {
        let b = b.min(v.len());
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j)));
        prop_assert_eq!(top_indices(&v, b), idx[..b].to_vec());
    }

    #[test]
    fn scores_follow_row_permutations(bundle in bundle_strategy(), rot in 0usize..30) {
        let n = bundle.len();
        let perm: Vec<usize> = (0..n).map(|j| (j + rot) % n).collect();
        let moved = bundle.select_rows(&perm);
        for id in [StrategyId::Entropy, StrategyId::Margin, StrategyId::LeastConfidence, StrategyId::Bald, StrategyId::VarRatio, StrategyId::MeanStd] {
            let a = score(id, &bundle, &CTX).unwrap();
            let b = score(id, &moved, &CTX).unwrap();
            for (j, &p) in perm.iter().enumerate() {
                prop_assert!((b[j] - a[p]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uncertainty_scores_are_bounded(bundle in bundle_strategy()) {
        let c = bundle.eval_probs.cols() as f64;
        let ent = score(StrategyId::Entropy, &bundle, &CTX).unwrap();
        prop_assert!(ent.iter().all(|&e| e >= -1e-12 && e <= c.ln() + 1e-12));
        let lc = score(StrategyId::LeastConfidence, &bundle, &CTX).unwrap();
        prop_assert!(lc.iter().all(|&v| (0.0..=1.0 - 1.0 / c + 1e-12).contains(&v)));
        let bald = score(StrategyId::Bald, &bundle, &CTX).unwrap();
        prop_assert!(bald.iter().zip(&ent).all(|(&b, _)| b >= 0.0 && b <= c.ln() + 1e-12));
    }

    #[test]
    fn table_columns_are_normalized_and_marked(bundle in bundle_strategy(), t in 0.05f64..0.95) {
        let n = bundle.len();
        prop_assume!(t * n as f64 >= 1.0);
        let ids = [StrategyId::Entropy, StrategyId::Margin, StrategyId::MeanStd];
        let table = build_score_table(&bundle, &ids, &TableSettings { t_sim: t, kmeans_iters: 5, seed: 0 }).unwrap();
        for k in 0..ids.len() {
            let col = table.normalized.column(k);
            prop_assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert_eq!(table.binary.column(k).iter().filter(|&&v| v == 1.0).count(), top_count(t, n));
        }
    }
}

#[test]
fn confident_rows_score_lowest() {
    let eval = RealMatrix::<f64>::from_f64(3, 3, &[0.98, 0.01, 0.01, 0.4, 0.35, 0.25, 0.34, 0.33, 0.33]).unwrap();
    let bundle = PredictionBundle::new(eval, None, None).unwrap();
    for id in [StrategyId::Entropy, StrategyId::Margin, StrategyId::LeastConfidence] {
        assert_eq!(top_indices(&score(id, &bundle, &CTX).unwrap(), 3), vec![2, 1, 0], "{id}");
    }
}
