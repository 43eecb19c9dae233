use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentReport, Method};
use crate::error::Result;
use crate::interpret::{ImportanceMethod, ImportanceReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AurocRow {
    pub dataset: String,
    pub horizon: Option<u32>,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub dataset: String,
    pub horizon: Option<u32>,
    pub trial: usize,
    pub feature: String,
    pub score: f64,
    pub method: ImportanceMethod,
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
}

#[derive(Debug, Serialize)]
struct CorrelationRow<'a> {
    a: &'a str,
    b: &'a str,
    r: f64,
    degenerate: bool,
}

fn importance_rows(dataset: &str, horizon: Option<u32>, trial: usize, r: &ImportanceReport) -> Vec<ImportanceRow> {
    r.feature_names
        .iter()
        .zip(&r.scores)
        .map(|(f, &score)| ImportanceRow {
            dataset: dataset.to_string(),
            horizon,
            trial,
            feature: f.clone(),
            score,
            method: r.method,
            model: r.model.clone(),
            seed: r.seed,
            repeats: r.repeats,
        })
        .collect()
}

/// Writes `report.json`, `aurocs.csv`, `importances.csv` and `correlations.csv` into `dir`.
pub fn write_exports(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut json = BufWriter::new(File::create(dir.join("report.json"))?);
    json.write_all(report.to_json()?.as_bytes())?;
    json.write_all(b"\n")?;
    json.flush()?;

    let mut w = csv::Writer::from_path(dir.join("aurocs.csv"))?;
    for t in &report.trials {
        w.serialize(AurocRow {
            dataset: t.dataset.clone(),
            horizon: t.horizon,
            method: t.method,
            trial: t.trial,
            seed: t.seed,
            auroc: t.auroc,
        })?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("importances.csv"))?;
    for t in &report.trials {
        for r in [&t.internal, &t.permutation] {
            for row in importance_rows(&t.dataset, t.horizon, t.trial, r) {
                w.serialize(row)?;
            }
        }
    }
    for u in &report.univariate {
        for row in importance_rows(&u.dataset, u.horizon, u.trial, &u.report) {
            w.serialize(row)?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("correlations.csv"))?;
    if let Some(c) = &report.correlation {
        for (i, a) in c.labels.iter().enumerate() {
            for (j, b) in c.labels.iter().enumerate() {
                w.serialize(CorrelationRow { a, b, r: c.values[i][j], degenerate: c.degenerate[i][j] })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_aurocs_csv<R: Read>(reader: R) -> Result<Vec<AurocRow>> {
    Ok(csv::Reader::from_reader(reader).deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_importances_csv<R: Read>(reader: R) -> Result<Vec<ImportanceRow>> {
    Ok(csv::Reader::from_reader(reader).deserialize().collect::<std::result::Result<_, _>>()?)
}
