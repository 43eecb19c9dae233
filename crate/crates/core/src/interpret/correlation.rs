use serde::{Deserialize, Serialize};

use super::ImportanceReport;
use crate::error::{Error, Result};
use crate::stats::pearson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// `degenerate[a][b]` is set when either score vector is constant.
    pub degenerate: Vec<Vec<bool>>,
}

/// Pearson correlation between every pair of reports over a shared feature set.
pub fn importance_correlation(reports: &[ImportanceReport]) -> Result<CorrelationMatrix> {
    if reports.len() < 2 {
        return Err(Error::validation("need at least two reports to correlate"));
    }
    let names = &reports[0].feature_names;
    for r in &reports[1..] {
        if r.scores.len() != reports[0].scores.len() {
            return Err(Error::validation(format!(
                "report '{}' has {} scores, expected {}",
                r.label(),
                r.scores.len(),
                reports[0].scores.len()
            )));
        }
        if &r.feature_names != names {
            return Err(Error::validation(format!("report '{}' uses a different feature ordering", r.label())));
        }
    }
    let labels: Vec<String> = reports.iter().map(ImportanceReport::label).collect();
    correlation_matrix(labels, &reports.iter().map(|r| r.scores.clone()).collect::<Vec<_>>())
}

/// Correlation matrix of arbitrary labeled vectors; used for pooled reports.
pub(crate) fn correlation_matrix(labels: Vec<String>, vectors: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let k = vectors.len();
    let mut values = vec![vec![1.0; k]; k];
    let mut degenerate = vec![vec![false; k]; k];
    for a in 0..k {
        for b in (a + 1)..k {
            let c = pearson(&vectors[a], &vectors[b])?;
            values[a][b] = c.r;
            values[b][a] = c.r;
            degenerate[a][b] = c.degenerate;
            degenerate[b][a] = c.degenerate;
        }
    }
    Ok(CorrelationMatrix { labels, values, degenerate })
}
