use std::hint::black_box;

use acore::model_zoo::ModelSpec;
use acore::pipeline::surface_for;
use acore::rng::seeded;
use acore::{
    calibrate, confidence_set, fit_quantile, generate_labeled_sample, simulate_tau_set, train_odds, ClassifierSpec,
    ExactOddsOracle, LogOdds, NullMode, PipelineConfig, QuantileKind, StageTimings,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn odds_profile(c: &mut Criterion) {
    let m = ModelSpec::poisson_counting();
    let grid = m.grid();
    let sample = generate_labeled_sample(&m, 1000, 0.5, &mut seeded(1)).unwrap();
    let qda = train_odds(&m, &sample, &ClassifierSpec::Qda, &mut seeded(2)).unwrap();
    let mlp = train_odds(&m, &sample, &ClassifierSpec::mlp(), &mut seeded(2)).unwrap();
    let oracle = ExactOddsOracle::new(&m, 0.5).unwrap();
    let data = m.simulate(&[10.0], 10, &mut seeded(3)).unwrap();
    let mut g = c.benchmark_group("profile_100pt");
    g.bench_function("qda", |b| b.iter(|| qda.profile(&grid, black_box(&data))));
    g.bench_function("mlp", |b| b.iter(|| mlp.profile(&grid, black_box(&data))));
    g.bench_function("oracle", |b| b.iter(|| oracle.profile(&grid, black_box(&data))));
    g.finish();
}

fn stages(c: &mut Criterion) {
    let m = ModelSpec::poisson_counting();
    let grid = m.grid();
    let sample = generate_labeled_sample(&m, 1000, 0.5, &mut seeded(1)).unwrap();
    let odds = train_odds(&m, &sample, &ClassifierSpec::Qda, &mut seeded(2)).unwrap();
    let train = simulate_tau_set(&m, &odds, &grid, 5000, &NullMode::Pointwise, &mut seeded(4)).unwrap();
    let cfg = PipelineConfig::default();
    let surface = surface_for(&m, &odds, &grid, &cfg, &mut seeded(5), &mut StageTimings::default()).unwrap();
    let data = m.simulate(&[10.0], 10, &mut seeded(3)).unwrap();

    let mut g = c.benchmark_group("stages");
    g.sample_size(10);
    g.bench_function("train_qda_b1000", |b| {
        b.iter(|| train_odds(&m, black_box(&sample), &ClassifierSpec::Qda, &mut seeded(2)).unwrap())
    });
    g.bench_function("simulate_tau_b5000", |b| {
        b.iter(|| simulate_tau_set(&m, &odds, &grid, 5000, &NullMode::Pointwise, &mut seeded(4)).unwrap())
    });
    g.bench_function("fit_boosted_quantile_b5000", |b| {
        b.iter(|| fit_quantile(black_box(&train), 0.1, &QuantileKind::default()).unwrap())
    });
    g.bench_function("fit_knn_quantile_b5000", |b| {
        b.iter(|| fit_quantile(black_box(&train), 0.1, &QuantileKind::KnnQuantile { k: None }).unwrap())
    });
    g.bench_function("confidence_set", |b| {
        b.iter(|| confidence_set(&odds, &surface, black_box(&data), &grid).unwrap())
    });
    g.bench_function("full_qda_pipeline", |b| b.iter(|| calibrate(&m, &grid, &cfg, &mut seeded(6)).unwrap()));
    g.finish();
}

criterion_group!(benches, odds_profile, stages);
criterion_main!(benches);
