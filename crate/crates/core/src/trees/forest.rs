use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::cart::{check_params, grow_classifier, TreeParams};
use super::{columns, EnsembleConfig, EnsembleKind, EnsembleModel};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed::{self, Rng};
use crate::par;

/// Features sampled per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mtry {
    /// `ceil(sqrt(d))`
    Sqrt,
    /// `max(1, d / 3)`
    Third,
    Count(usize),
}

impl Mtry {
    pub fn resolve(&self, d: usize) -> usize {
        match *self {
            Mtry::Sqrt => ((d as f64).sqrt().ceil() as usize).clamp(1, d.max(1)),
            Mtry::Third => (d / 3).max(1),
            Mtry::Count(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub mtry: Mtry,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 500, max_depth: None, min_samples_leaf: 1, mtry: Mtry::Sqrt, bootstrap: true, seed: 0 }
    }
}

impl ForestConfig {
    /// n_trees {100, 500} x mtry {sqrt, d/3} x min_samples_leaf {1, 5}.
    pub fn default_grid() -> Vec<ForestConfig> {
        let mut grid = Vec::new();
        for n_trees in [100, 500] {
            for mtry in [Mtry::Sqrt, Mtry::Third] {
                for min_samples_leaf in [1, 5] {
                    grid.push(ForestConfig { n_trees, mtry, min_samples_leaf, ..Default::default() });
                }
            }
        }
        grid
    }
}

/// `n` row indices drawn uniformly with replacement.
pub fn bootstrap_sample(n: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Bagged Gini trees; tree `t` draws from an RNG stream derived from `(seed, t)`.
pub fn fit_random_forest(train: &LabeledDataset, config: &ForestConfig) -> Result<EnsembleModel> {
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::validation("random forest needs both classes present"));
    }
    if config.n_trees == 0 {
        return Err(Error::validation("n_trees must be positive"));
    }
    let d = train.n_cols();
    let params = TreeParams { max_depth: config.max_depth, min_samples_leaf: config.min_samples_leaf, mtry: config.mtry.resolve(d) };
    check_params(&params, d)?;
    let cols = columns(&train.x);
    let n = train.n_rows();
    let trees = par::map_range(config.n_trees, |t| {
        let mut rng = seed::rng(config.seed, &[t as u64]);
        let idx = if config.bootstrap { bootstrap_sample(n, &mut rng) } else { (0..n).collect() };
        grow_classifier(&cols, &train.y, idx, &params, &mut rng)
    });
    Ok(EnsembleModel {
        kind: EnsembleKind::Forest,
        n_features: d,
        base_score: 0.0,
        trees,
        config: EnsembleConfig::Forest(config.clone()),
    })
}
