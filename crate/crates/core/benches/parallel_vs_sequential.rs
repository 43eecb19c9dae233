//! Single-thread pool against the default rayon pool on the hot paths.
//!
//! Build with `--no-default-features` to time the plain sequential code; the
//! two pool sizes then coincide.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ehr_interpret::dataset::{split_train_test, LabeledDataset};
use ehr_interpret::experiment::{load_conditions, run_trial, DatasetConfig, DatasetSource, ExperimentConfig, TuningGrids};
use ehr_interpret::interpret::permutation_importance;
use ehr_interpret::linear::PenaltyConfig;
use ehr_interpret::synth::{generate_tabular, TabularSpec};
use ehr_interpret::trees::{fit_random_forest, BoostConfig, ForestConfig};

fn data() -> (LabeledDataset, LabeledDataset) {
    let d = generate_tabular(&TabularSpec::planted(2000, 20, 5, 1.0, 1)).unwrap().into_labeled().unwrap();
    split_train_test(&d, 0.5, 1).unwrap()
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut sizes = vec![1];
    if n > 1 {
        sizes.push(n);
    }
    sizes
        .into_iter()
        .map(|t| (format!("threads={t}"), rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap()))
        .collect()
}

fn bench(c: &mut Criterion) {
    let (train, test) = data();
    let forest = ForestConfig { n_trees: 100, seed: 3, ..ForestConfig::default() };
    let model = fit_random_forest(&train, &forest).unwrap();

    let spec = TabularSpec::planted(600, 10, 3, 1.0, 2);
    let mut config = ExperimentConfig::new(vec![DatasetConfig { name: "b".into(), source: DatasetSource::Synthetic { spec } }]);
    config.grids = TuningGrids {
        lr: vec![PenaltyConfig::l2(1.0), PenaltyConfig::l1(0.01)],
        rf: vec![ForestConfig { n_trees: 50, ..ForestConfig::default() }],
        gbm: vec![BoostConfig { n_rounds: 50, ..BoostConfig::default() }],
    };
    let cond = load_conditions(&config).unwrap().remove(0);

    let mut g = c.benchmark_group("parallel_vs_sequential");
    g.sample_size(10);
    for (label, pool) in pools() {
        g.bench_function(BenchmarkId::new("forest_fit", &label), |b| b.iter(|| pool.install(|| fit_random_forest(&train, &forest).unwrap())));
        g.bench_function(BenchmarkId::new("permutation_importance", &label), |b| {
            b.iter(|| pool.install(|| permutation_importance(&model, &test, 5, 3).unwrap()))
        });
        g.bench_function(BenchmarkId::new("run_trial", &label), |b| b.iter(|| pool.install(|| run_trial(&cond, 0, 0, &config).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
