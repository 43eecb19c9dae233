use std::collections::HashSet;

use ehr_interpret::cohort::CohortSpec;
use ehr_interpret::dataset::{split_train_test, standardize};
use ehr_interpret::experiment::{
    cross_validate_tune, load_conditions, run_experiment, run_trial, stratified_kfold, Condition, DatasetConfig,
    DatasetSource, ExperimentConfig, HyperParams, Method, RecordsInput, TuningGrids,
};
use ehr_interpret::linear::PenaltyConfig;
use ehr_interpret::synth::{generate_tabular, RecordsSpec, TabularSpec};
use ehr_interpret::trees::{BoostConfig, ForestConfig};
use proptest::prelude::*;

fn single_point_grids() -> TuningGrids {
    TuningGrids {
        lr: vec![PenaltyConfig::l2(1.0)],
        rf: vec![ForestConfig { n_trees: 30, ..ForestConfig::default() }],
        gbm: vec![BoostConfig { n_rounds: 30, ..BoostConfig::default() }],
    }
}

fn records_config(n_trials: usize) -> ExperimentConfig {
    let records = RecordsSpec { n_patients: 500, seed: 41, ..RecordsSpec::default() };
    let mut config = ExperimentConfig::new(vec![DatasetConfig {
        name: "records".into(),
        source: DatasetSource::Records {
            records: RecordsInput::Synthetic { spec: records.clone() },
            cohort: CohortSpec::new(records.outcome_code.clone(), 1),
            labs: None,
        },
    }]);
    config.n_trials = n_trials;
    config.grids = single_point_grids();
    config.master_seed = 41;
    config.top_k = 4;
    config
}

#[test]
fn test_row_sentinels_leave_training_artifacts_unchanged() {
    let spec = TabularSpec { missing_rate: 0.1, ..TabularSpec::planted(240, 6, 3, 1.5, 7) };
    let mut config = ExperimentConfig::new(vec![DatasetConfig { name: "t".into(), source: DatasetSource::Synthetic { spec } }]);
    config.grids = TuningGrids {
        lr: vec![PenaltyConfig::l2(1.0), PenaltyConfig::l1(0.05)],
        rf: vec![ForestConfig { n_trees: 20, ..ForestConfig::default() }, ForestConfig { n_trees: 20, min_samples_leaf: 5, ..ForestConfig::default() }],
        gbm: vec![BoostConfig { n_rounds: 20, ..BoostConfig::default() }, BoostConfig { n_rounds: 20, max_depth: 2, ..BoostConfig::default() }],
    };
    config.cv_folds = 3;
    let cond = load_conditions(&config).unwrap().remove(0);
    for trial in 0..3 {
        let clean = run_trial(&cond, 0, trial, &config).unwrap();
        let mut data = cond.data.clone();
        for &i in &clean.test_rows {
            for j in 0..data.x.n_cols() {
                data.x.set(i, j, Some(1e6));
            }
        }
        let poisoned = run_trial(&Condition { data, ..cond.clone() }, 0, trial, &config).unwrap();
        assert_eq!(clean.train_rows, poisoned.train_rows);
        assert_eq!(clean.standardization, poisoned.standardization);
        assert_eq!(clean.models, poisoned.models);
        assert_eq!(clean.univariate, poisoned.univariate);
        for (a, b) in clean.results.iter().zip(&poisoned.results) {
            assert_eq!(a.hyperparameters, b.hyperparameters);
            assert_eq!(a.cv_aurocs, b.cv_aurocs);
            assert_eq!(a.internal, b.internal);
        }
    }
}

#[test]
fn tuning_prefers_ridge_over_saturated_lasso() {
    // the saturated lasso point comes first, so ties would pick it
    let grid = vec![HyperParams::Lr(PenaltyConfig::l1(1e6)), HyperParams::Lr(PenaltyConfig::l2(0.01))];
    for s in 0..10 {
        let data = generate_tabular(&TabularSpec::planted(400, 8, 3, 1.0, 200 + s)).unwrap().into_labeled().unwrap();
        let (train, _) = split_train_test(&data, 0.5, s).unwrap();
        let (z, _) = standardize(&train.x, None).unwrap();
        let train = train.with_x(z).unwrap();
        let tuned = cross_validate_tune(&train, &grid, 5, s).unwrap();
        assert_eq!(tuned.best_index, 1, "seed {s}: {:?}", tuned.mean_aurocs);
        assert_eq!(tuned.mean_aurocs[0], 0.5);
    }
}

#[test]
fn report_shape_comparisons_and_feature_order() {
    let mut config = records_config(10);
    config.horizons = vec![1, 182, 365];
    let report = run_experiment(&config).unwrap();

    for &h in &config.horizons {
        let cells: usize = Method::ALL.iter().map(|&m| report.aurocs(m, Some(h)).len()).sum();
        assert_eq!(cells, 30, "horizon {h}");
        let pairs: HashSet<(Method, Method)> =
            report.comparisons.iter().filter(|c| c.horizon == Some(h)).map(|c| (c.method_a, c.method_b)).collect();
        let expected: HashSet<(Method, Method)> =
            [(Method::Lr, Method::Rf), (Method::Lr, Method::Gbm), (Method::Rf, Method::Gbm)].into_iter().collect();
        assert_eq!(pairs, expected);
    }
    assert_eq!(report.comparisons.len(), 9);
    for c in &report.comparisons {
        let adj = c.test.p_adjusted.unwrap();
        assert!(adj >= c.test.p_value && adj <= 1.0);
        assert_eq!(adj, (c.test.p_value * 9.0).min(1.0));
    }

    let names = &report.conditions[0].feature_names;
    assert!(report.conditions.iter().all(|c| &c.feature_names == names));
    for t in &report.trials {
        assert_eq!(&t.internal.feature_names, names);
        assert_eq!(&t.permutation.feature_names, names);
        assert!((0.0..=1.0).contains(&t.auroc));
    }
    for u in &report.univariate {
        assert_eq!(&u.report.feature_names, names);
    }
    let corr = report.correlation.as_ref().unwrap();
    assert_eq!(corr.labels.len(), corr.values.len());
    let bic = report.bicluster.as_ref().unwrap();
    assert_eq!(bic.matrix.len(), 3);
}

#[test]
fn trial_seeds_and_splits_differ_across_trials() {
    let config = records_config(4);
    let conds = load_conditions(&config).unwrap();
    let seeds: HashSet<u64> = (0..4).map(|t| run_trial(&conds[0], 0, t, &config).unwrap().seed).collect();
    assert_eq!(seeds.len(), 4);
    let a = run_trial(&conds[0], 0, 0, &config).unwrap();
    let b = run_trial(&conds[0], 0, 1, &config).unwrap();
    assert_ne!(a.test_rows, b.test_rows);
    assert_eq!(a, run_trial(&conds[0], 0, 0, &config).unwrap());
}

#[test]
fn config_survives_json() {
    let config = records_config(3);
    let text = serde_json::to_string(&config).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, config);
    let minimal: ExperimentConfig =
        serde_json::from_str(r#"{"datasets":[{"name":"a","source":"synthetic","spec":{"n_samples":10,"n_features":2,"planted_beta":[1,0]}}]}"#)
            .unwrap();
    assert_eq!(minimal.n_trials, ExperimentConfig::new(minimal.datasets.clone()).n_trials);
    minimal.validate().unwrap();
}

proptest! {
    #[test]
    fn kfold_partitions_and_stratifies(y in prop::collection::vec(0u8..2, 10..200), k in 2usize..6, s in any::<u64>()) {
        let pos = y.iter().filter(|&&v| v == 1).count();
        prop_assume!(pos >= k && y.len() - pos >= k);
        let folds = stratified_kfold(&y, k, s).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for class in 0..2u8 {
            let c: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| y[i] == class).count()).collect();
            prop_assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
        }
    }
}
