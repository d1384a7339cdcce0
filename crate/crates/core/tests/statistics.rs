//! Monte Carlo checks of the distributional claims behind the method.

use acore::model_zoo::{ModelSpec, ParamSpace};
use acore::rng::seeded;
use acore::{
    acore_statistic, calibrate, confidence_set, cross_entropy, generate_labeled_sample, mc_critical_surface,
    mc_exact_critical, train_odds, ClassifierSpec, ExactOddsOracle, PipelineConfig,
};

#[test]
fn wilks_critical_value_for_the_normal_mean() {
    // τ = −Λ/2 → −χ²₁/2, whose lower 0.1-quantile is −2.706/2
    let base = ModelSpec::gaussian_mean();
    let space = ParamSpace::new(base.space.bounds().to_vec(), 401).unwrap();
    let m = ModelSpec::new(base.kind, space, 10).unwrap();
    let grid = m.grid();
    let zero = grid.nearest(&[0.0]);
    assert_eq!(grid.point(zero), &[0.0]);
    let oracle = ExactOddsOracle::new(&m, 0.5).unwrap();
    let stat = |d: &acore::Dataset| acore_statistic(&oracle, d, &[zero], &grid).unwrap().tau;
    let c = mc_exact_critical(&m, stat, &[0.0], 0.1, 100_000, &mut seeded(3)).unwrap();
    assert!((c + 1.353).abs() < 0.03, "{c}");
}

#[test]
fn fitted_critical_value_has_nominal_level_at_the_true_theta() {
    let m = ModelSpec::poisson_counting();
    let grid = m.grid();
    let cal = calibrate(&m, &grid, &PipelineConfig::default(), &mut seeded(4)).unwrap();
    let star = grid.nearest(&[10.0]);
    let stat = |d: &acore::Dataset| acore_statistic(&cal.odds, d, &[star], &grid).unwrap().tau;
    let draws = acore::oracle::null_statistics(&m, &stat, grid.point(star), 4000, &mut seeded(5)).unwrap();
    let rejected = draws.iter().filter(|&&t| t < cal.surface.values[star]).count() as f64 / draws.len() as f64;
    assert!((rejected - 0.1).abs() < 0.03, "rejection rate {rejected}");
}

#[test]
fn confidence_sets_nest_in_alpha() {
    let m = ModelSpec::gmm();
    let grid = m.grid();
    let oracle = ExactOddsOracle::new(&m, 0.5).unwrap();
    let wide = mc_critical_surface(&m, &oracle, &grid, 0.05, 1000, &mut seeded(6)).unwrap();
    let narrow = mc_critical_surface(&m, &oracle, &grid, 0.2, 1000, &mut seeded(6)).unwrap();
    let mut rng = seeded(7);
    for _ in 0..20 {
        let data = m.simulate(&[5.0], 10, &mut rng).unwrap();
        let a = confidence_set(&oracle, &wide, &data, &grid).unwrap();
        let b = confidence_set(&oracle, &narrow, &data, &grid).unwrap();
        assert!(b.accepted.iter().all(|&j| a.contains(j)));
    }
}

#[test]
fn exact_odds_have_the_lowest_cross_entropy() {
    for (m, specs) in [
        (ModelSpec::poisson_counting(), vec![ClassifierSpec::Qda, ClassifierSpec::Logistic]),
        (ModelSpec::gmm(), vec![ClassifierSpec::Qda, ClassifierSpec::mlp()]),
    ] {
        let hold = generate_labeled_sample(&m, 5000, 0.5, &mut seeded(8)).unwrap();
        let exact = cross_entropy(&ExactOddsOracle::new(&m, 0.5).unwrap(), &hold).unwrap();
        let sample = generate_labeled_sample(&m, 1000, 0.5, &mut seeded(9)).unwrap();
        for spec in specs {
            let odds = train_odds(&m, &sample, &spec, &mut seeded(10)).unwrap();
            let ce = cross_entropy(&odds, &hold).unwrap();
            assert!(exact <= ce + 0.005, "{:?} {}: exact {exact} vs {ce}", m.kind, spec.name());
        }
    }
}
