//! Newton boosting of regression trees on the logistic loss.
//!
//! Each round computes `g = p - y` and `h = p(1 - p)` at the current scores and
//! grows a tree whose splits maximize
//!
//! ```text
//! gain = 1/2 * [ G_L^2/(H_L + lambda) + G_R^2/(H_R + lambda) - G^2/(H + lambda) ]
//! ```
//!
//! with leaf weights `-G/(H + lambda)`. Scores move by `learning_rate * weight`.

use serde::{Deserialize, Serialize};

use super::{columns, EnsembleConfig, EnsembleKind, EnsembleModel, Tree, TreeNode};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linear::sigmoid;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub reg_lambda: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { n_rounds: 100, learning_rate: 0.1, max_depth: 3, reg_lambda: 1.0, min_child_weight: 1.0, seed: 0 }
    }
}

impl BoostConfig {
    /// n_rounds {100, 500} x learning_rate {0.1, 0.01} x max_depth {3, 6} x reg_lambda {1, 10}.
    pub fn default_grid() -> Vec<BoostConfig> {
        let mut grid = Vec::new();
        for n_rounds in [100, 500] {
            for learning_rate in [0.1, 0.01] {
                for max_depth in [3, 6] {
                    for reg_lambda in [1.0, 10.0] {
                        grid.push(BoostConfig { n_rounds, learning_rate, max_depth, reg_lambda, ..Default::default() });
                    }
                }
            }
        }
        grid
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::validation(format!("learning_rate {} not in (0, 1]", self.learning_rate)));
        }
        if self.max_depth == 0 {
            return Err(Error::validation("max_depth must be positive"));
        }
        if !(self.reg_lambda >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::validation("reg_lambda and min_child_weight must be >= 0"));
        }
        Ok(())
    }
}

/// Below this many (rows x features) a node's split search stays on one thread.
const PARALLEL_SPLIT_WORK: usize = 16_384;

struct GainSplit {
    threshold: f64,
    gain: f64,
}

fn best_split_on_feature(
    col: &[f64],
    g: &[f64],
    h: &[f64],
    idx: &[usize],
    config: &BoostConfig,
    totals: (f64, f64),
) -> Option<GainSplit> {
    let (gt, ht) = totals;
    let lambda = config.reg_lambda;
    let parent = gt * gt / (ht + lambda);
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_unstable_by(|&a, &b| col[a].total_cmp(&col[b]));
    let (mut gl, mut hl) = (0.0, 0.0);
    let mut best: Option<GainSplit> = None;
    for k in 0..order.len() - 1 {
        gl += g[order[k]];
        hl += h[order[k]];
        let (v, next) = (col[order[k]], col[order[k + 1]]);
        if v == next {
            continue;
        }
        let (gr, hr) = (gt - gl, ht - hl);
        if hl < config.min_child_weight || hr < config.min_child_weight {
            continue;
        }
        let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
        if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(GainSplit { threshold: 0.5 * (v + next), gain });
        }
    }
    best
}

fn grow_regression_tree(cols: &[Vec<f64>], g: &[f64], h: &[f64], config: &BoostConfig) -> Tree {
    let n = g.len();
    let mut nodes = vec![TreeNode::Leaf { value: 0.0, n_samples: 0 }];
    let mut stack = vec![(0usize, (0..n).collect::<Vec<usize>>(), 0usize)];
    while let Some((slot, idx, depth)) = stack.pop() {
        let gt: f64 = idx.iter().map(|&i| g[i]).sum();
        let ht: f64 = idx.iter().map(|&i| h[i]).sum();
        let leaf = TreeNode::Leaf { value: -gt / (ht + config.reg_lambda), n_samples: idx.len() };
        if depth >= config.max_depth || idx.len() < 2 {
            nodes[slot] = leaf;
            continue;
        }
        let search = |f: usize| best_split_on_feature(&cols[f], g, h, &idx, config, (gt, ht));
        let per_feature: Vec<Option<GainSplit>> = if idx.len() * cols.len() >= PARALLEL_SPLIT_WORK {
            par::map_range(cols.len(), search)
        } else {
            (0..cols.len()).map(search).collect()
        };
        let mut best: Option<(usize, GainSplit)> = None;
        for (f, cand) in per_feature.into_iter().enumerate() {
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|(_, b)| c.gain > b.gain) {
                    best = Some((f, c));
                }
            }
        }
        let Some((feature, split)) = best else {
            nodes[slot] = leaf;
            continue;
        };
        let col = &cols[feature];
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] <= split.threshold);
        let left = nodes.len();
        nodes.push(TreeNode::Leaf { value: 0.0, n_samples: 0 });
        nodes.push(TreeNode::Leaf { value: 0.0, n_samples: 0 });
        nodes[slot] = TreeNode::Split {
            feature,
            threshold: split.threshold,
            gini_decrease: split.gain,
            n_samples: idx.len(),
            left,
            right: left + 1,
        };
        stack.push((left + 1, ri, depth + 1));
        stack.push((left, li, depth + 1));
    }
    Tree { nodes }
}

/// Boosted ensemble starting from the training prior log-odds.
pub fn fit_gradient_boosting(train: &LabeledDataset, config: &BoostConfig) -> Result<EnsembleModel> {
    config.validate()?;
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::validation("gradient boosting needs both classes present"));
    }
    let n = train.n_rows();
    let prior = counts[1] as f64 / n as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let cols = columns(&train.x);
    let y: Vec<f64> = train.y.iter().map(|&v| f64::from(v)).collect();
    let mut scores = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_rounds);
    for _ in 0..config.n_rounds {
        let p: Vec<f64> = scores.iter().map(|&s| sigmoid(s)).collect();
        let g: Vec<f64> = p.iter().zip(&y).map(|(pi, yi)| pi - yi).collect();
        let h: Vec<f64> = p.iter().map(|pi| pi * (1.0 - pi)).collect();
        let tree = grow_regression_tree(&cols, &g, &h, config);
        for (i, s) in scores.iter_mut().enumerate() {
            *s += config.learning_rate * tree.leaf_value(train.x.row(i));
        }
        trees.push(tree);
    }
    Ok(EnsembleModel {
        kind: EnsembleKind::Boosted,
        n_features: train.n_cols(),
        base_score,
        trees,
        config: EnsembleConfig::Boosted(config.clone()),
    })
}
