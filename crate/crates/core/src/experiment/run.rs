use std::collections::HashMap;

use super::{
    cross_validate_tune, fit_model, BiclusterSummary, Comparison, ConditionSummary, DatasetSource, ExperimentConfig,
    ExperimentReport, FittedModel, Method, RecordsInput, TrialResult, UnivariateTrial,
};
use crate::cohort::{build_cohort, read_records, CohortSpec, LabConfig};
use crate::dataset::{load_dataset, read_meta, standardize, stratified_split, LabeledDataset, RawDataset, StandardizationStats};
use crate::error::{Error, Result};
use crate::impute::fit_imputer;
use crate::interpret::{bicluster, correlation_matrix, permutation_importance, CorrelationMatrix, ImportanceReport, Predictor};
use crate::linear::univariate_screen;
use crate::stats::{auroc, bonferroni, median, wilcoxon_rank_sum};
use crate::synth::{generate_records, generate_tabular};
use crate::{par, seed};

/// One modeling dataset: a named source at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub dataset: String,
    pub horizon: Option<u32>,
    pub data: RawDataset,
}

impl Condition {
    /// Row label used in pooled outputs.
    pub fn label(&self) -> String {
        match self.horizon {
            Some(h) => format!("{}@{h}d", self.dataset),
            None => self.dataset.clone(),
        }
    }
}

/// Materializes every dataset; records sources yield one condition per horizon.
pub fn load_conditions(config: &ExperimentConfig) -> Result<Vec<Condition>> {
    let mut out = Vec::new();
    for (k, ds) in config.datasets.iter().enumerate() {
        match &ds.source {
            DatasetSource::Synthetic { spec } => {
                out.push(Condition { dataset: ds.name.clone(), horizon: None, data: generate_tabular(spec)? });
            }
            DatasetSource::Csv { path, meta } => {
                let schema = meta.as_ref().map(read_meta).transpose()?;
                let data = load_dataset(path, schema.as_deref())?;
                out.push(Condition { dataset: ds.name.clone(), horizon: None, data });
            }
            DatasetSource::Records { records, cohort, labs } => {
                let (recs, default_labs) = match records {
                    RecordsInput::File { path } => (read_records(path)?, LabConfig::default()),
                    RecordsInput::Synthetic { spec } => (generate_records(spec)?, spec.lab_config()),
                };
                let labs = labs.clone().unwrap_or(default_labs);
                for &h in &config.horizons {
                    let spec = CohortSpec { horizon_days: h, ..cohort.clone() };
                    let c = build_cohort(&recs, &spec, &labs, seed::derive(config.master_seed, &[0xC0, k as u64, u64::from(h)]))?;
                    out.push(Condition { dataset: ds.name.clone(), horizon: Some(h), data: c.features.data });
                }
            }
        }
    }
    Ok(out)
}

/// Everything one trial produced, including the training-side artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Statistics learned from the (imputed) training rows.
    pub standardization: StandardizationStats,
    pub models: Vec<(Method, FittedModel)>,
    pub results: Vec<TrialResult>,
    pub univariate: UnivariateTrial,
}

fn context(e: Error, what: &str) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(format!("{what}: {m}")),
        other => other,
    }
}

/// Runs trial `trial` of condition `cond_index` with seed
/// `derive(master_seed, [cond_index, trial])`. No held-out value reaches
/// imputation fitting, standardization, tuning or model fitting.
pub fn run_trial(cond: &Condition, cond_index: usize, trial: usize, config: &ExperimentConfig) -> Result<TrialOutcome> {
    let what = format!("{} trial {trial}", cond.label());
    let trial_seed = seed::derive(config.master_seed, &[cond_index as u64, trial as u64]);
    let (train_rows, test_rows) = stratified_split(&cond.data.y, config.test_fraction, trial_seed).map_err(|e| context(e, &what))?;
    let train_raw = cond.data.subset(&train_rows)?;
    let test_raw = cond.data.subset(&test_rows)?;

    let (train_x, test_x) = if train_raw.x.has_missing() || test_raw.x.has_missing() {
        let (tx, imputer) = fit_imputer(&train_raw.x, &config.imputation).map_err(|e| context(e, &what))?;
        (tx, imputer.transform(&test_raw.x)?)
    } else {
        (train_raw.x, test_raw.x)
    };
    let (train_x, standardization) = standardize(&train_x, None)?;
    let (test_x, _) = standardize(&test_x, Some(&standardization))?;
    let train = LabeledDataset::new(train_x, train_raw.y, train_raw.meta)?;
    let test = LabeledDataset::new(test_x, test_raw.y, test_raw.meta)?;
    let names = train.feature_names();

    let screen = univariate_screen(&train, config.univariate_alpha)?;
    let per_method = par::try_map_range(config.methods.len(), |mi| {
        let method = config.methods[mi];
        let what = format!("{what} {method}");
        let grid = config.grids.for_method(method);
        let tuned = cross_validate_tune(&train, &grid, config.cv_folds, seed::derive(trial_seed, &[1, mi as u64]))
            .map_err(|e| context(e, &what))?;
        let model_seed = seed::derive(trial_seed, &[2, mi as u64]);
        let model = fit_model(&train, &tuned.best, model_seed).map_err(|e| context(e, &what))?;
        let score = auroc(&model.predict_proba(&test.x)?, &test.y).map_err(|e| context(e, &what))?.auroc;
        let internal = model.internal_importance(&names)?;
        let permutation = permutation_importance(&model, &test, seed::derive(trial_seed, &[3, mi as u64]), config.permutation_repeats)?
            .with_model(method.as_str());
        let result = TrialResult {
            dataset: cond.dataset.clone(),
            horizon: cond.horizon,
            trial,
            seed: trial_seed,
            method,
            auroc: score,
            hyperparameters: tuned.best.with_seed(model_seed),
            cv_aurocs: tuned.mean_aurocs,
            internal,
            permutation,
        };
        Ok::<_, Error>((model, result))
    })?;

    let mut models = Vec::new();
    let mut results = Vec::new();
    for ((model, result), &m) in per_method.into_iter().zip(&config.methods) {
        models.push((m, model));
        results.push(result);
    }
    Ok(TrialOutcome {
        seed: trial_seed,
        train_rows,
        test_rows,
        standardization,
        models,
        results,
        univariate: UnivariateTrial { dataset: cond.dataset.clone(), horizon: cond.horizon, trial, report: screen.report },
    })
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        v.iter().map(|x| (x - mean) / sd).collect()
    } else {
        vec![0.0; v.len()]
    }
}

fn mean_scores<'a>(reports: impl Iterator<Item = &'a ImportanceReport>) -> Option<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut count = 0.0;
    for r in reports {
        let a = acc.get_or_insert_with(|| vec![0.0; r.scores.len()]);
        a.iter_mut().zip(&r.scores).for_each(|(s, v)| *s += v);
        count += 1.0;
    }
    acc.map(|a| a.into_iter().map(|s| s / count).collect())
}

/// Per-condition reports, keyed by importance label, in a fixed order.
fn condition_reports<'a>(
    cond: &Condition,
    trials: &'a [TrialResult],
    univariate: &'a [UnivariateTrial],
    methods: &[Method],
) -> Vec<(String, Vec<&'a ImportanceReport>)> {
    let mine = |t: &&TrialResult| t.dataset == cond.dataset && t.horizon == cond.horizon;
    let mut out = Vec::new();
    for &m in methods {
        let ts: Vec<&TrialResult> = trials.iter().filter(mine).filter(|t| t.method == m).collect();
        if let Some(first) = ts.first() {
            out.push((first.internal.label(), ts.iter().map(|t| &t.internal).collect()));
            out.push((first.permutation.label(), ts.iter().map(|t| &t.permutation).collect()));
        }
    }
    let uni: Vec<&ImportanceReport> =
        univariate.iter().filter(|u| u.dataset == cond.dataset && u.horizon == cond.horizon).map(|u| &u.report).collect();
    out.push(("univariate".to_string(), uni));
    out
}

/// Correlation of trial-mean importance vectors, z-scored within each
/// condition and concatenated across conditions.
fn pooled_correlation(conds: &[Condition], trials: &[TrialResult], uni: &[UnivariateTrial], methods: &[Method]) -> Result<Option<CorrelationMatrix>> {
    let mut labels: Vec<String> = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for cond in conds {
        for (label, reports) in condition_reports(cond, trials, uni, methods) {
            let Some(mean) = mean_scores(reports.into_iter()) else { continue };
            let k = match labels.iter().position(|l| *l == label) {
                Some(k) => k,
                None => {
                    labels.push(label);
                    vectors.push(Vec::new());
                    labels.len() - 1
                }
            };
            vectors[k].extend(zscore(&mean));
        }
    }
    if labels.len() < 2 {
        return Ok(None);
    }
    Ok(Some(correlation_matrix(labels, &vectors)?))
}

fn pooled_bicluster(conds: &[Condition], trials: &[TrialResult], methods: &[Method], top_k: usize) -> Result<Option<BiclusterSummary>> {
    let method = if methods.contains(&Method::Rf) { Method::Rf } else { methods[0] };
    let mut rows: Vec<(String, Vec<String>, Vec<f64>)> = Vec::new();
    for cond in conds {
        let reports = trials
            .iter()
            .filter(|t| t.dataset == cond.dataset && t.horizon == cond.horizon && t.method == method)
            .map(|t| &t.permutation);
        if let Some(mean) = mean_scores(reports) {
            rows.push((cond.label(), cond.data.meta.iter().map(|m| m.name.clone()).collect(), mean));
        }
    }
    if rows.is_empty() {
        return Ok(None);
    }
    let mut cols: Vec<String> = Vec::new();
    for (_, names, scores) in &rows {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        for &j in idx.iter().take(top_k.min(scores.len())) {
            if !cols.contains(&names[j]) {
                cols.push(names[j].clone());
            }
        }
    }
    let matrix: Vec<Vec<f64>> = rows
        .iter()
        .map(|(_, names, scores)| {
            let pos: HashMap<&str, usize> = names.iter().enumerate().map(|(j, n)| (n.as_str(), j)).collect();
            cols.iter().map(|c| pos.get(c.as_str()).map_or(0.0, |&j| scores[j])).collect()
        })
        .collect();
    let row_labels: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    let clusters = bicluster(&matrix, &row_labels, &cols)?;
    Ok(Some(BiclusterSummary { source: format!("{}-permutation", method.as_str()), matrix, clusters }))
}

fn compare_methods(conds: &[Condition], trials: &[TrialResult], methods: &[Method]) -> Result<Vec<Comparison>> {
    let mut horizons: Vec<Option<u32>> = Vec::new();
    for c in conds {
        if !horizons.contains(&c.horizon) {
            horizons.push(c.horizon);
        }
    }
    let mut out = Vec::new();
    for &h in &horizons {
        let samples = |m: Method| -> Vec<f64> { trials.iter().filter(|t| t.method == m && t.horizon == h).map(|t| t.auroc).collect() };
        for (i, &a) in methods.iter().enumerate() {
            for &b in &methods[i + 1..] {
                let (sa, sb) = (samples(a), samples(b));
                out.push(Comparison {
                    horizon: h,
                    method_a: a,
                    method_b: b,
                    median_a: median(&sa).unwrap_or(f64::NAN),
                    median_b: median(&sb).unwrap_or(f64::NAN),
                    test: wilcoxon_rank_sum(&sa, &sb)?,
                });
            }
        }
    }
    let adjusted = bonferroni(&out.iter().map(|c| c.test.p_value).collect::<Vec<_>>())?;
    for (c, p) in out.iter_mut().zip(adjusted) {
        c.test.p_adjusted = Some(p);
    }
    Ok(out)
}

/// Runs every (condition, trial) in parallel and assembles the report in a
/// fixed order, so the result depends only on the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let conds = load_conditions(config)?;
    let n_trials = config.n_trials;
    let outcomes = par::try_map_range(conds.len() * n_trials, |job| {
        let (ci, t) = (job / n_trials, job % n_trials);
        run_trial(&conds[ci], ci, t, config)
    })?;
    let mut trials = Vec::new();
    let mut univariate = Vec::new();
    for o in outcomes {
        trials.extend(o.results);
        univariate.push(o.univariate);
    }
    let conditions = conds
        .iter()
        .map(|c| ConditionSummary {
            dataset: c.dataset.clone(),
            horizon: c.horizon,
            n_rows: c.data.x.n_rows(),
            n_cases: c.data.y.iter().filter(|&&v| v == 1).count(),
            feature_names: c.data.meta.iter().map(|m| m.name.clone()).collect(),
        })
        .collect();
    let comparisons = compare_methods(&conds, &trials, &config.methods)?;
    let correlation = pooled_correlation(&conds, &trials, &univariate, &config.methods)?;
    let bicluster = pooled_bicluster(&conds, &trials, &config.methods, config.top_k)?;
    Ok(ExperimentReport { config: config.clone(), conditions, trials, univariate, comparisons, correlation, bicluster })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscore_constant_is_zero() {
        assert_eq!(zscore(&[2.0, 2.0]), vec![0.0, 0.0]);
        let z = zscore(&[1.0, 3.0]);
        assert_eq!(z, vec![-1.0, 1.0]);
    }
}
