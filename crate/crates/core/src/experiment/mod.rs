//! Repeated-trial comparison of LR, RF and GBM: split, impute, standardize,
//! tune by cross-validated AUROC, refit, score on held-out data, and extract
//! importances; then compare methods and pool importances across datasets.

mod export;
mod run;
mod tune;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortSpec, LabConfig};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::impute::ImputationConfig;
use crate::interpret::{Bicluster, CorrelationMatrix, ImportanceReport, Predictor};
use crate::linear::{coefficient_importance, fit_logistic, LinearModel, PenaltyConfig};
use crate::stats::TestResult;
use crate::synth::{RecordsSpec, TabularSpec};
use crate::trees::{fit_gradient_boosting, fit_random_forest, gini_importance, BoostConfig, EnsembleModel, ForestConfig};

pub use export::{read_aurocs_csv, read_importances_csv, write_exports, AurocRow, ImportanceRow};
pub use run::{load_conditions, run_experiment, run_trial, Condition, TrialOutcome};
pub use tune::{cross_validate_tune, stratified_kfold, TuneResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lr,
    Rf,
    Gbm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Lr, Method::Rf, Method::Gbm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lr => "lr",
            Method::Rf => "rf",
            Method::Gbm => "gbm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(Method::Lr),
            "rf" => Ok(Method::Rf),
            "gbm" => Ok(Method::Gbm),
            other => Err(Error::validation(format!("unknown method '{other}' (expected lr, rf or gbm)"))),
        }
    }
}

/// One grid point for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "params", rename_all = "lowercase")]
pub enum HyperParams {
    Lr(PenaltyConfig),
    Rf(ForestConfig),
    Gbm(BoostConfig),
}

impl HyperParams {
    pub fn method(&self) -> Method {
        match self {
            HyperParams::Lr(_) => Method::Lr,
            HyperParams::Rf(_) => Method::Rf,
            HyperParams::Gbm(_) => Method::Gbm,
        }
    }

    /// The same grid point with its RNG seed replaced (no-op for LR).
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            HyperParams::Lr(p) => HyperParams::Lr(*p),
            HyperParams::Rf(c) => HyperParams::Rf(ForestConfig { seed, ..c.clone() }),
            HyperParams::Gbm(c) => HyperParams::Gbm(BoostConfig { seed, ..c.clone() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FittedModel {
    Linear(LinearModel),
    Ensemble(EnsembleModel),
}

impl FittedModel {
    /// Coefficient magnitudes for LR, Gini importance for the ensembles.
    pub fn internal_importance(&self, feature_names: &[String]) -> Result<ImportanceReport> {
        match self {
            FittedModel::Linear(m) => coefficient_importance(m, feature_names),
            FittedModel::Ensemble(m) => gini_importance(m, feature_names),
        }
    }
}

impl Predictor for FittedModel {
    fn n_features(&self) -> usize {
        match self {
            FittedModel::Linear(m) => m.n_features(),
            FittedModel::Ensemble(m) => m.n_features(),
        }
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            FittedModel::Linear(m) => m.predict_row(row),
            FittedModel::Ensemble(m) => m.predict_row(row),
        }
    }
}

/// Fits one grid point; `seed` overrides the ensemble RNG seed.
pub fn fit_model(train: &LabeledDataset, params: &HyperParams, seed: u64) -> Result<FittedModel> {
    Ok(match params.with_seed(seed) {
        HyperParams::Lr(p) => FittedModel::Linear(fit_logistic(train, &p)?),
        HyperParams::Rf(c) => FittedModel::Ensemble(fit_random_forest(train, &c)?),
        HyperParams::Gbm(c) => FittedModel::Ensemble(fit_gradient_boosting(train, &c)?),
    })
}

/// Where the patient records of a records-backed dataset come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "lowercase")]
pub enum RecordsInput {
    File { path: PathBuf },
    Synthetic { spec: RecordsSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic {
        spec: TabularSpec,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        meta: Option<PathBuf>,
    },
    /// One cohort per configured horizon; `cohort.horizon_days` is ignored.
    Records {
        records: RecordsInput,
        cohort: CohortSpec,
        #[serde(default)]
        labs: Option<LabConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrids {
    #[serde(default = "PenaltyConfig::default_grid")]
    pub lr: Vec<PenaltyConfig>,
    #[serde(default = "ForestConfig::default_grid")]
    pub rf: Vec<ForestConfig>,
    #[serde(default = "BoostConfig::default_grid")]
    pub gbm: Vec<BoostConfig>,
}

impl Default for TuningGrids {
    fn default() -> Self {
        Self { lr: PenaltyConfig::default_grid(), rf: ForestConfig::default_grid(), gbm: BoostConfig::default_grid() }
    }
}

impl TuningGrids {
    pub fn for_method(&self, method: Method) -> Vec<HyperParams> {
        match method {
            Method::Lr => self.lr.iter().map(|p| HyperParams::Lr(*p)).collect(),
            Method::Rf => self.rf.iter().cloned().map(HyperParams::Rf).collect(),
            Method::Gbm => self.gbm.iter().cloned().map(HyperParams::Gbm).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Applies to records-backed datasets only.
    #[serde(default = "default_horizons")]
    pub horizons: Vec<u32>,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub grids: TuningGrids,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_repeats")]
    pub permutation_repeats: usize,
    /// Used only when a dataset has missing cells.
    #[serde(default)]
    pub imputation: ImputationConfig,
    #[serde(default = "default_alpha")]
    pub univariate_alpha: f64,
    /// Features taken from each row's top list for the bicluster.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_horizons() -> Vec<u32> {
    crate::cohort::DEFAULT_HORIZONS.to_vec()
}
fn default_trials() -> usize {
    10
}
fn default_test_fraction() -> f64 {
    0.5
}
fn default_folds() -> usize {
    10
}
fn default_repeats() -> usize {
    1
}
fn default_alpha() -> f64 {
    0.05
}
fn default_top_k() -> usize {
    10
}

impl ExperimentConfig {
    pub fn new(datasets: Vec<DatasetConfig>) -> Self {
        Self {
            datasets,
            methods: default_methods(),
            horizons: default_horizons(),
            n_trials: default_trials(),
            test_fraction: default_test_fraction(),
            cv_folds: default_folds(),
            grids: TuningGrids::default(),
            master_seed: 0,
            permutation_repeats: default_repeats(),
            imputation: ImputationConfig::default(),
            univariate_alpha: default_alpha(),
            top_k: default_top_k(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::validation("experiment needs at least one dataset"));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("dataset names must be unique"));
        }
        if self.methods.is_empty() {
            return Err(Error::validation("experiment needs at least one method"));
        }
        let mut m = self.methods.clone();
        m.sort_unstable();
        m.dedup();
        if m.len() != self.methods.len() {
            return Err(Error::validation("methods listed twice"));
        }
        if self.n_trials == 0 {
            return Err(Error::validation("n_trials must be at least 1"));
        }
        if self.cv_folds < 2 {
            return Err(Error::validation("cv_folds must be at least 2"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::validation("test_fraction must be in (0, 1)"));
        }
        if self.permutation_repeats == 0 || self.top_k == 0 {
            return Err(Error::validation("permutation_repeats and top_k must be positive"));
        }
        if self.datasets.iter().any(|d| matches!(d.source, DatasetSource::Records { .. })) && self.horizons.is_empty() {
            return Err(Error::validation("records datasets need at least one horizon"));
        }
        for method in &self.methods {
            if self.grids.for_method(*method).is_empty() {
                return Err(Error::validation(format!("tuning grid for {method} is empty")));
            }
        }
        Ok(())
    }
}

/// One (method, condition, trial) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub dataset: String,
    pub horizon: Option<u32>,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub auroc: f64,
    pub hyperparameters: HyperParams,
    pub cv_aurocs: Vec<f64>,
    /// Coefficient (LR) or Gini (ensembles) importance on the training refit.
    pub internal: ImportanceReport,
    /// Permutation importance on the held-out rows.
    pub permutation: ImportanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateTrial {
    pub dataset: String,
    pub horizon: Option<u32>,
    pub trial: usize,
    pub report: ImportanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub dataset: String,
    pub horizon: Option<u32>,
    pub n_rows: usize,
    pub n_cases: usize,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub horizon: Option<u32>,
    pub method_a: Method,
    pub method_b: Method,
    pub median_a: f64,
    pub median_b: f64,
    pub test: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiclusterSummary {
    /// Importance label the matrix is built from, e.g. `rf-permutation`.
    pub source: String,
    /// Rows are conditions, columns the union of each row's top features.
    pub matrix: Vec<Vec<f64>>,
    pub clusters: Bicluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub conditions: Vec<ConditionSummary>,
    pub trials: Vec<TrialResult>,
    pub univariate: Vec<UnivariateTrial>,
    pub comparisons: Vec<Comparison>,
    pub correlation: Option<CorrelationMatrix>,
    pub bicluster: Option<BiclusterSummary>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn aurocs(&self, method: Method, horizon: Option<u32>) -> Vec<f64> {
        self.trials.iter().filter(|t| t.method == method && t.horizon == horizon).map(|t| t.auroc).collect()
    }
}
