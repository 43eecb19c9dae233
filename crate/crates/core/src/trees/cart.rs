use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{columns, Tree, TreeNode};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split.
    pub mtry: usize,
}

/// Grows one classification tree on the whole of `train`.
pub fn fit_tree(train: &LabeledDataset, params: &TreeParams, rng: &mut Rng) -> Result<Tree> {
    check_params(params, train.n_cols())?;
    let cols = columns(&train.x);
    let idx: Vec<usize> = (0..train.n_rows()).collect();
    Ok(grow_classifier(&cols, &train.y, idx, params, rng))
}

pub(crate) fn check_params(params: &TreeParams, d: usize) -> Result<()> {
    if params.mtry == 0 || params.mtry > d {
        return Err(Error::validation(format!("mtry {} not in 1..={d}", params.mtry)));
    }
    if params.min_samples_leaf == 0 {
        return Err(Error::validation("min_samples_leaf must be positive"));
    }
    Ok(())
}

/// Picks `k` distinct features from `0..d`, returned in ascending order.
pub(crate) fn sample_features(d: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    if k >= d {
        return (0..d).collect();
    }
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = rng.random_range(i..d);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

struct Candidate {
    feature: usize,
    threshold: f64,
    /// `pos_l*neg_l/n_l + pos_r*neg_r/n_r`; smaller is purer.
    score: f64,
}

/// Best Gini split over `features`, ties broken by lowest feature then lowest threshold.
fn best_split(
    cols: &[Vec<f64>],
    y: &[u8],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
    buf: &mut Vec<(f64, u8)>,
) -> Option<Candidate> {
    let n = idx.len();
    let total_pos: usize = idx.iter().map(|&i| usize::from(y[i])).sum();
    let mut best: Option<Candidate> = None;
    for &f in features {
        let col = &cols[f];
        buf.clear();
        buf.extend(idx.iter().map(|&i| (col[i], y[i])));
        buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut pos_l = 0usize;
        for k in 0..n - 1 {
            pos_l += usize::from(buf[k].1);
            let n_l = k + 1;
            if buf[k].0 == buf[k + 1].0 || n_l < min_leaf || n - n_l < min_leaf {
                continue;
            }
            let n_r = n - n_l;
            let pos_r = total_pos - pos_l;
            let score = (pos_l * (n_l - pos_l)) as f64 / n_l as f64 + (pos_r * (n_r - pos_r)) as f64 / n_r as f64;
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Candidate { feature: f, threshold: 0.5 * (buf[k].0 + buf[k + 1].0), score });
            }
        }
    }
    best
}

/// Grows a classification tree on the (possibly repeated) rows in `idx`.
pub(crate) fn grow_classifier(cols: &[Vec<f64>], y: &[u8], idx: Vec<usize>, params: &TreeParams, rng: &mut Rng) -> Tree {
    let d = cols.len();
    let mut nodes = vec![TreeNode::Leaf { value: 0.0, n_samples: 0 }];
    let mut stack = vec![(0usize, idx, 0usize)];
    let mut buf = Vec::new();
    while let Some((slot, idx, depth)) = stack.pop() {
        let n = idx.len();
        let pos: usize = idx.iter().map(|&i| usize::from(y[i])).sum();
        let leaf = TreeNode::Leaf { value: if n == 0 { 0.0 } else { pos as f64 / n as f64 }, n_samples: n };
        let depth_ok = params.max_depth.is_none_or(|m| depth < m);
        if pos == 0 || pos == n || !depth_ok || n < 2 * params.min_samples_leaf {
            nodes[slot] = leaf;
            continue;
        }
        let features = sample_features(d, params.mtry, rng);
        let Some(best) = best_split(cols, y, &idx, &features, params.min_samples_leaf, &mut buf) else {
            nodes[slot] = leaf;
            continue;
        };
        let parent = (pos * (n - pos)) as f64 / n as f64;
        let decrease = (2.0 * (parent - best.score) / n as f64).max(0.0);
        let col = &cols[best.feature];
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] <= best.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(TreeNode::Leaf { value: 0.0, n_samples: 0 });
        nodes.push(TreeNode::Leaf { value: 0.0, n_samples: 0 });
        nodes[slot] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            gini_decrease: decrease,
            n_samples: n,
            left,
            right,
        };
        stack.push((right, right_idx, depth + 1));
        stack.push((left, left_idx, depth + 1));
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn params(d: usize) -> TreeParams {
        TreeParams { max_depth: None, min_samples_leaf: 1, mtry: d }
    }

    #[test]
    fn pure_node_is_leaf() {
        let d = LabeledDataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![1, 1, 1]).unwrap();
        let t = fit_tree(&d, &params(1), &mut seed::rng(0, &[])).unwrap();
        assert_eq!(t.nodes, vec![TreeNode::Leaf { value: 1.0, n_samples: 3 }]);
    }

    #[test]
    fn single_clean_split() {
        let rows: Vec<Vec<f64>> = (1..=6).map(|v| vec![f64::from(v)]).collect();
        let d = LabeledDataset::from_rows(&rows, vec![1, 1, 1, 0, 0, 0]).unwrap();
        let t = fit_tree(&d, &params(1), &mut seed::rng(0, &[])).unwrap();
        match &t.nodes[0] {
            TreeNode::Split { feature, threshold, gini_decrease, n_samples, .. } => {
                assert_eq!((*feature, *threshold, *n_samples), (0, 3.5, 6));
                assert!((gini_decrease - 0.5).abs() < 1e-15);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.n_splits(), 1);
        t.validate().unwrap();
    }

    #[test]
    fn tie_breaks_to_lowest_feature() {
        // both features separate the classes identically
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]];
        let d = LabeledDataset::from_rows(&rows, vec![0, 1, 0, 1]).unwrap();
        let t = fit_tree(&d, &params(2), &mut seed::rng(0, &[])).unwrap();
        assert!(matches!(t.nodes[0], TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn constant_features_give_leaf() {
        let d = LabeledDataset::from_rows(&[vec![1.0], vec![1.0]], vec![0, 1]).unwrap();
        let t = fit_tree(&d, &params(1), &mut seed::rng(0, &[])).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn min_leaf_and_depth_respected() {
        let rows: Vec<Vec<f64>> = (0..40).map(|v| vec![f64::from(v)]).collect();
        let y: Vec<u8> = (0..40).map(|v| (v % 3 == 0) as u8).collect();
        let d = LabeledDataset::from_rows(&rows, y).unwrap();
        let p = TreeParams { max_depth: Some(3), min_samples_leaf: 5, mtry: 1 };
        let t = fit_tree(&d, &p, &mut seed::rng(0, &[])).unwrap();
        assert!(t.depth() <= 3);
        assert!(t.nodes.iter().all(|n| !matches!(n, TreeNode::Leaf { n_samples, .. } if *n_samples < 5)));
    }

    #[test]
    fn bad_mtry_rejected() {
        let d = LabeledDataset::from_rows(&[vec![1.0], vec![2.0]], vec![0, 1]).unwrap();
        let p = TreeParams { mtry: 2, ..params(1) };
        assert!(fit_tree(&d, &p, &mut seed::rng(0, &[])).is_err());
    }
}
