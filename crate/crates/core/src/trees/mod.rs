//! CART trees with the Gini criterion, bagged random forests, and
//! second-order regularized gradient boosting.
//!
//! Trees are stored as flat node arrays with the root at index 0. A sample
//! goes left at a split when `x[feature] <= threshold`.

mod boost;
mod cart;
mod forest;

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::interpret::{ImportanceMethod, ImportanceReport, Predictor};
use crate::linear::sigmoid;

pub use boost::{fit_gradient_boosting, BoostConfig};
pub use cart::{fit_tree, TreeParams};
pub use forest::{bootstrap_sample, fit_random_forest, ForestConfig, Mtry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NodeRecord", try_from = "NodeRecord")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Impurity decrease at this node (regularized gain for boosted trees).
        gini_decrease: f64,
        n_samples: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Positive-class fraction for classification trees, additive weight for boosted trees.
        value: f64,
        n_samples: usize,
    },
}

impl TreeNode {
    pub fn n_samples(&self) -> usize {
        match self {
            TreeNode::Split { n_samples, .. } | TreeNode::Leaf { n_samples, .. } => *n_samples,
        }
    }
}

/// Flat JSON form of a node.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct NodeRecord {
    feature: Option<usize>,
    threshold: Option<f64>,
    gain: Option<f64>,
    n: usize,
    left: Option<usize>,
    right: Option<usize>,
    leaf_value: Option<f64>,
}

impl From<TreeNode> for NodeRecord {
    fn from(node: TreeNode) -> Self {
        match node {
            TreeNode::Split { feature, threshold, gini_decrease, n_samples, left, right } => NodeRecord {
                feature: Some(feature),
                threshold: Some(threshold),
                gain: Some(gini_decrease),
                n: n_samples,
                left: Some(left),
                right: Some(right),
                leaf_value: None,
            },
            TreeNode::Leaf { value, n_samples } => NodeRecord {
                feature: None,
                threshold: None,
                gain: None,
                n: n_samples,
                left: None,
                right: None,
                leaf_value: Some(value),
            },
        }
    }
}

impl TryFrom<NodeRecord> for TreeNode {
    type Error = String;

    fn try_from(r: NodeRecord) -> std::result::Result<Self, String> {
        match (r.feature, r.threshold, r.left, r.right, r.leaf_value) {
            (Some(feature), Some(threshold), Some(left), Some(right), None) => Ok(TreeNode::Split {
                feature,
                threshold,
                gini_decrease: r.gain.unwrap_or(0.0),
                n_samples: r.n,
                left,
                right,
            }),
            (None, None, None, None, Some(value)) => Ok(TreeNode::Leaf { value, n_samples: r.n }),
            _ => Err("node must be either a split (feature, threshold, left, right) or a leaf (leaf_value)".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Value of the leaf reached by `row`.
    pub fn leaf_value(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    k = if row[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { value, .. } => return *value,
            }
        }
    }

    pub fn root_samples(&self) -> usize {
        self.nodes.first().map_or(0, TreeNode::n_samples)
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Split { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn rec(nodes: &[TreeNode], k: usize) -> usize {
            match &nodes[k] {
                TreeNode::Split { left, right, .. } => 1 + rec(nodes, *left).max(rec(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            rec(&self.nodes, 0)
        }
    }

    /// Structural checks: child indices in range and sample counts consistent.
    pub fn validate(&self) -> Result<()> {
        for node in &self.nodes {
            if let TreeNode::Split { left, right, n_samples, gini_decrease, .. } = node {
                let (l, r) = (self.nodes.get(*left), self.nodes.get(*right));
                match (l, r) {
                    (Some(l), Some(r)) if l.n_samples() + r.n_samples() == *n_samples => {}
                    _ => return Err(Error::validation("split children inconsistent with parent")),
                }
                if *gini_decrease < 0.0 {
                    return Err(Error::validation("negative split gain"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Forest,
    Boosted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleConfig {
    Forest(ForestConfig),
    Boosted(BoostConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub kind: EnsembleKind,
    pub n_features: usize,
    /// Initial log-odds for boosted ensembles; unused for forests.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub config: EnsembleConfig,
}

impl Predictor for EnsembleModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.config {
            EnsembleConfig::Forest(_) => {
                if self.trees.is_empty() {
                    return 0.5;
                }
                let sum: f64 = self.trees.iter().map(|t| t.leaf_value(row)).sum();
                sum / self.trees.len() as f64
            }
            EnsembleConfig::Boosted(c) => {
                let score = self.trees.iter().fold(self.base_score, |acc, t| acc + c.learning_rate * t.leaf_value(row));
                sigmoid(score)
            }
        }
    }
}

/// Forest: mean leaf probability. Boosted: logistic of the additive score.
pub fn predict_proba_ensemble(model: &EnsembleModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

/// Sample-weighted split gains per feature, averaged over trees and
/// normalized to sum to one (all zeros when no split has positive gain).
pub fn gini_importance(model: &EnsembleModel, feature_names: &[String]) -> Result<ImportanceReport> {
    if feature_names.len() != model.n_features {
        return Err(Error::validation("feature name count does not match the model"));
    }
    let mut scores = vec![0.0; model.n_features];
    for tree in &model.trees {
        let root = tree.root_samples().max(1) as f64;
        for node in &tree.nodes {
            if let TreeNode::Split { feature, gini_decrease, n_samples, .. } = node {
                scores[*feature] += *n_samples as f64 / root * gini_decrease;
            }
        }
    }
    if !model.trees.is_empty() {
        let n = model.trees.len() as f64;
        scores.iter_mut().for_each(|s| *s /= n);
    }
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        scores.iter_mut().for_each(|s| *s /= total);
    }
    let model_tag = match model.kind {
        EnsembleKind::Forest => "rf",
        EnsembleKind::Boosted => "gbm",
    };
    Ok(ImportanceReport::new(ImportanceMethod::Gini, feature_names.to_vec(), scores)?.with_model(model_tag))
}

/// Column-major copy of a complete matrix for split search.
pub(crate) fn columns(x: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..x.n_cols()).map(|j| x.column(j)).collect()
}
