//! Model interpretation: importance reports, permutation importance,
//! cross-method correlation, and biclustering of importance matrices.

mod bicluster;
mod correlation;
mod heatmap;
mod permutation;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

pub use bicluster::{bicluster, cluster_rows, Bicluster, Dendrogram, Merge};
pub(crate) use correlation::correlation_matrix;
pub use correlation::{importance_correlation, CorrelationMatrix};
pub use heatmap::{render_heatmap_svg, HEATMAP_CELL_CLASS};
pub use permutation::permutation_importance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMethod {
    Coefficient,
    Univariate,
    Gini,
    Permutation,
}

impl ImportanceMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImportanceMethod::Coefficient => "coefficient",
            ImportanceMethod::Univariate => "univariate",
            ImportanceMethod::Gini => "gini",
            ImportanceMethod::Permutation => "permutation",
        }
    }
}

impl std::str::FromStr for ImportanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coefficient" => Ok(Self::Coefficient),
            "univariate" => Ok(Self::Univariate),
            "gini" => Ok(Self::Gini),
            "permutation" => Ok(Self::Permutation),
            other => Err(Error::validation(format!("unknown importance method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    /// Model kind the scores describe (`lr`, `rf`, `gbm`); `None` for model-free measures.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub repeats: Option<usize>,
}

impl ImportanceReport {
    pub fn new(method: ImportanceMethod, feature_names: Vec<String>, scores: Vec<f64>) -> Result<Self> {
        if feature_names.len() != scores.len() {
            return Err(Error::validation(format!(
                "{} feature names for {} scores",
                feature_names.len(),
                scores.len()
            )));
        }
        Ok(Self { method, feature_names, scores, model: None, seed: None, repeats: None })
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Short display label such as `rf-permutation` or `univariate`.
    pub fn label(&self) -> String {
        match &self.model {
            Some(m) => format!("{m}-{}", self.method.as_str()),
            None => self.method.as_str().to_string(),
        }
    }

    /// Checks the method-specific score invariants.
    pub fn validate(&self) -> Result<()> {
        if self.feature_names.len() != self.scores.len() {
            return Err(Error::validation("feature names and scores differ in length"));
        }
        match self.method {
            ImportanceMethod::Gini => {
                if self.scores.iter().any(|&s| s < 0.0) {
                    return Err(Error::validation("negative gini importance"));
                }
                let total: f64 = self.scores.iter().sum();
                if total != 0.0 && (total - 1.0).abs() > 1e-9 {
                    return Err(Error::validation(format!("gini importances sum to {total}")));
                }
            }
            ImportanceMethod::Permutation => {
                if self.scores.iter().any(|s| !(-1.0..=1.0).contains(s)) {
                    return Err(Error::validation("permutation importance outside [-1, 1]"));
                }
            }
            ImportanceMethod::Coefficient | ImportanceMethod::Univariate => {
                if self.scores.iter().any(|&s| s < 0.0) {
                    return Err(Error::validation("negative magnitude score"));
                }
            }
        }
        Ok(())
    }
}

/// Uniform probability/class interface over fitted models.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;

    /// Probability of the positive class for one feature row.
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::validation(format!(
                "model expects {} features, matrix has {}",
                self.n_features(),
                x.n_cols()
            )));
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }

    fn predict_class(&self, x: &FeatureMatrix) -> Result<Vec<u8>> {
        Ok(self.predict_proba(x)?.into_iter().map(classify).collect())
    }
}

/// Class decision at the 0.5 threshold; a probability of exactly 0.5 is class 0.
#[inline]
pub fn classify(p: f64) -> u8 {
    u8::from(p > 0.5)
}

/// Wraps a closure as a [`Predictor`].
pub struct FnPredictor<F> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnPredictor<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}

impl Predictor for crate::linear::LinearModel {
    fn n_features(&self) -> usize {
        self.beta.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        crate::linear::sigmoid(self.linear_predictor(row))
    }
}

/// Feature indices by descending score, ties by ascending index.
pub fn top_k_features(report: &ImportanceReport, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > report.len() {
        return Err(Error::validation(format!("k = {k} not in 1..={}", report.len())));
    }
    let mut idx: Vec<usize> = (0..report.len()).collect();
    idx.sort_by(|&a, &b| report.scores[b].total_cmp(&report.scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportRow {
    feature: String,
    score: f64,
    method: ImportanceMethod,
    model: Option<String>,
    seed: Option<u64>,
    repeats: Option<usize>,
}

/// Flat CSV with one row per (report, feature).
pub fn write_reports_csv<W: Write>(writer: W, reports: &[ImportanceReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in reports {
        for (name, &score) in r.feature_names.iter().zip(&r.scores) {
            w.serialize(ReportRow {
                feature: name.clone(),
                score,
                method: r.method,
                model: r.model.clone(),
                seed: r.seed,
                repeats: r.repeats,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_reports_csv`]: consecutive rows sharing
/// (method, model, seed, repeats) form one report.
pub fn read_reports_csv<R: Read>(reader: R) -> Result<Vec<ImportanceReport>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: Vec<ImportanceReport> = Vec::new();
    for row in rdr.deserialize() {
        let row: ReportRow = row?;
        let same = out.last().is_some_and(|r| {
            r.method == row.method
                && r.model == row.model
                && r.seed == row.seed
                && r.repeats == row.repeats
                && !r.feature_names.contains(&row.feature)
        });
        if !same {
            out.push(ImportanceReport {
                method: row.method,
                feature_names: Vec::new(),
                scores: Vec::new(),
                model: row.model,
                seed: row.seed,
                repeats: row.repeats,
            });
        }
        let last = out.last_mut().expect("pushed above");
        last.feature_names.push(row.feature);
        last.scores.push(row.score);
    }
    Ok(out)
}
