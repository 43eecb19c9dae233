use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{fit_model, HyperParams};
use crate::dataset::{class_counts, standardize, LabeledDataset};
use crate::error::{Error, Result};
use crate::interpret::Predictor;
use crate::{par, seed, stats};

/// Stratified partition of row indices into `k` folds, each sorted ascending.
///
/// Each class is shuffled and dealt round-robin, continuing from where the
/// previous class stopped, so every class and every fold size is within one
/// of even.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let counts = class_counts(y);
    let minority = counts[0].min(counts[1]);
    if k < 2 || k > minority {
        return Err(Error::validation(format!("{k} folds infeasible with a minority class of {minority}")));
    }
    let mut rng = seed::rng(seed, &[0xF01D]);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: HyperParams,
    pub best_index: usize,
    /// Mean validation AUROC per grid point.
    pub mean_aurocs: Vec<f64>,
}

/// Grid search by mean validation AUROC over stratified folds.
///
/// Each fold's training part is standardized on itself and the validation part
/// with those statistics. Ties go to the earliest grid point. A single-point
/// grid is returned as is, without cross-validation.
pub fn cross_validate_tune(train: &LabeledDataset, grid: &[HyperParams], folds: usize, seed: u64) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::validation("tuning grid is empty"));
    }
    if grid.len() == 1 {
        return Ok(TuneResult { best: grid[0].clone(), best_index: 0, mean_aurocs: Vec::new() });
    }
    let parts = stratified_kfold(&train.y, folds, seed)?;
    let splits: Vec<(LabeledDataset, LabeledDataset)> = (0..folds)
        .map(|f| {
            let val_idx = &parts[f];
            let fit_idx: Vec<usize> = (0..folds).filter(|&g| g != f).flat_map(|g| parts[g].iter().copied()).collect();
            let (fit, val) = (train.subset(&fit_idx)?, train.subset(val_idx)?);
            let (fx, st) = standardize(&fit.x, None)?;
            let (vx, _) = standardize(&val.x, Some(&st))?;
            Ok((fit.with_x(fx)?, val.with_x(vx)?))
        })
        .collect::<Result<_>>()?;

    let cells = par::try_map_range(grid.len() * folds, |c| {
        let (g, f) = (c / folds, c % folds);
        let (fit, val) = &splits[f];
        let model = fit_model(fit, &grid[g], seed::derive(seed, &[g as u64, f as u64]))?;
        Ok::<f64, Error>(stats::auroc(&model.predict_proba(&val.x)?, &val.y)?.auroc)
    })?;
    let mean_aurocs: Vec<f64> = cells.chunks(folds).map(|c| c.iter().sum::<f64>() / folds as f64).collect();
    let mut best_index = 0;
    for (g, &m) in mean_aurocs.iter().enumerate() {
        if m > mean_aurocs[best_index] {
            best_index = g;
        }
    }
    Ok(TuneResult { best: grid[best_index].clone(), best_index, mean_aurocs })
}
