use std::sync::OnceLock;

use acore::model_zoo::{Dataset, ModelSpec, ParamGrid, Region};
use acore::odds::log_odds_ratio;
use acore::quantile::lower_quantile;
use acore::rng::seeded;
use acore::{
    acore_statistic, critical_value_composite, fit_quantile, generate_labeled_sample, train_odds, ClassifierSpec,
    ExactOddsOracle, LogOdds, OddsModel, QuantileKind, TauTrainingSet,
};
use proptest::prelude::*;

fn poisson() -> &'static (ModelSpec, ParamGrid, OddsModel) {
    static CELL: OnceLock<(ModelSpec, ParamGrid, OddsModel)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = ModelSpec::poisson_counting();
        let sample = generate_labeled_sample(&m, 1000, 0.5, &mut seeded(1)).unwrap();
        let odds = train_odds(&m, &sample, &ClassifierSpec::Qda, &mut seeded(2)).unwrap();
        (m.clone(), m.grid(), odds)
    })
}

fn counts() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((80u32..140).prop_map(f64::from), 10)
}

fn region_indices(grid: &ParamGrid, a: f64, b: f64) -> Vec<usize> {
    Region::new(vec![a.min(b)], vec![a.max(b)]).grid_indices(grid)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tau_ignores_observation_order(xs in counts(), seed in any::<u64>(), a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let (_, grid, odds) = poisson();
        let region = region_indices(grid, a, b);
        prop_assume!(!region.is_empty());
        let mut shuffled = xs.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut seeded(seed));
        let d1 = Dataset::from_rows(1, xs.iter().map(|v| [*v])).unwrap();
        let d2 = Dataset::from_rows(1, shuffled.iter().map(|v| [*v])).unwrap();
        let t1 = acore_statistic(odds, &d1, &region, grid).unwrap();
        let t2 = acore_statistic(odds, &d2, &region, grid).unwrap();
        prop_assert_eq!(t1.tau.to_bits(), t2.tau.to_bits());
    }

    #[test]
    fn tau_is_never_positive(xs in counts(), a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let (m, grid, odds) = poisson();
        let region = region_indices(grid, a, b);
        prop_assume!(!region.is_empty());
        let d = Dataset::from_rows(1, xs.iter().map(|v| [*v])).unwrap();
        let oracle = ExactOddsOracle::new(m, 0.5).unwrap();
        for est in [odds as &dyn LogOdds, &oracle] {
            prop_assert!(acore_statistic(est, &d, &region, grid).unwrap().tau <= 0.0);
        }
    }

    #[test]
    fn log_odds_ratios_add(x in 60.0..160.0f64, t0 in 0.0..20.0f64, t1 in 0.0..20.0f64, t2 in 0.0..20.0f64) {
        let (_, _, odds) = poisson();
        let lhs = log_odds_ratio(odds, &[x], &[t0], &[t1]) + log_odds_ratio(odds, &[x], &[t1], &[t2]);
        let rhs = log_odds_ratio(odds, &[x], &[t0], &[t2]);
        prop_assert!((lhs - rhs).abs() < 1e-12, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn composite_critical_value_shrinks_with_the_region(a in 0.0..20.0f64, b in 0.0..20.0f64, c in 0.0..20.0f64) {
        let (_, grid, _) = poisson();
        let qm = calibration_model();
        let inner = region_indices(grid, a, b);
        let outer = region_indices(grid, a.min(b).min(c), a.max(b).max(c));
        prop_assume!(!inner.is_empty());
        let ci = critical_value_composite(qm, grid, &inner).unwrap();
        let co = critical_value_composite(qm, grid, &outer).unwrap();
        prop_assert!(co <= ci);
    }

    #[test]
    fn empirical_quantile_is_monotone_in_alpha(mut v in prop::collection::vec(-50.0..0.0f64, 1..200), a1 in 0.01..0.99f64, a2 in 0.01..0.99f64) {
        let (lo, hi) = (a1.min(a2), a1.max(a2));
        let mut w = v.clone();
        prop_assert!(lower_quantile(&mut v, lo).unwrap() <= lower_quantile(&mut w, hi).unwrap());
    }

    #[test]
    fn knn_quantile_is_monotone_in_alpha(theta in 0.0..20.0f64, a1 in 0.02..0.98f64, a2 in 0.02..0.98f64) {
        let (lo, hi) = (a1.min(a2), a1.max(a2));
        let train = synthetic_training_set();
        let kind = QuantileKind::KnnQuantile { k: None };
        let q_lo = fit_quantile(train, lo, &kind).unwrap().predict(&[theta]);
        let q_hi = fit_quantile(train, hi, &kind).unwrap().predict(&[theta]);
        prop_assert!(q_lo <= q_hi);
    }
}

fn synthetic_training_set() -> &'static TauTrainingSet {
    static CELL: OnceLock<TauTrainingSet> = OnceLock::new();
    CELL.get_or_init(|| {
        use rand::Rng;
        let mut rng = seeded(5);
        let mut t = TauTrainingSet { dim: 1, ..Default::default() };
        for _ in 0..1000 {
            let theta: f64 = rng.random_range(0.0..20.0);
            t.thetas.push(theta);
            t.taus.push(-rng.random_range(0.0..1.0) * (1.0 + theta / 10.0));
        }
        t
    })
}

fn calibration_model() -> &'static acore::QuantileModel {
    static CELL: OnceLock<acore::QuantileModel> = OnceLock::new();
    CELL.get_or_init(|| fit_quantile(synthetic_training_set(), 0.1, &QuantileKind::default()).unwrap())
}
