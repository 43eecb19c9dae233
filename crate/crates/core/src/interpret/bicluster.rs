//! Average-linkage agglomerative clustering of rows and columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One agglomeration step. Leaves are clusters `0..n`; the cluster created by
/// merge `k` has id `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
    pub leaf_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bicluster {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub row_order: Vec<usize>,
    pub col_order: Vec<usize>,
    pub row_dendrogram: Dendrogram,
    pub col_dendrogram: Dendrogram,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Clusters the given points (rows) with Euclidean distance and average linkage.
///
/// Each active cluster occupies the slot of its smallest leaf index; the
/// closest pair is merged, ties going to the lexicographically smallest slot
/// pair. The merged cluster keeps the lower slot and is the `left` child.
pub fn cluster_rows(points: &[Vec<f64>]) -> Dendrogram {
    let n = points.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&points[i], &points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut active = vec![true; n];
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in ((i + 1)..n).filter(|&j| active[j]) {
                if best.is_none_or(|(_, _, d)| dist[i][j] < d) {
                    best = Some((i, j, dist[i][j]));
                }
            }
        }
        let (i, j, d) = best.expect("at least two active clusters");
        let (ni, nj) = (sizes[i] as f64, sizes[j] as f64);
        for k in (0..n).filter(|&k| active[k] && k != i && k != j) {
            let updated = (ni * dist[i][k] + nj * dist[j][k]) / (ni + nj);
            dist[i][k] = updated;
            dist[k][i] = updated;
        }
        merges.push(Merge { left: ids[i], right: ids[j], distance: d, size: sizes[i] + sizes[j] });
        active[j] = false;
        sizes[i] += sizes[j];
        ids[i] = n + step;
    }
    let leaf_order = if n == 0 { Vec::new() } else { leaf_order(n, &merges) };
    Dendrogram { n_leaves: n, merges, leaf_order }
}

fn leaf_order(n: usize, merges: &[Merge]) -> Vec<usize> {
    if merges.is_empty() {
        return (0..n).collect();
    }
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![n + merges.len() - 1];
    while let Some(id) = stack.pop() {
        if id < n {
            order.push(id);
        } else {
            let m = &merges[id - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    order
}

/// Independently clusters the rows and the columns of `matrix`.
pub fn bicluster(matrix: &[Vec<f64>], row_labels: &[String], col_labels: &[String]) -> Result<Bicluster> {
    if matrix.is_empty() || matrix[0].is_empty() {
        return Err(Error::validation("bicluster needs a non-empty matrix"));
    }
    let n_cols = matrix[0].len();
    if matrix.iter().any(|r| r.len() != n_cols) {
        return Err(Error::validation("ragged bicluster matrix"));
    }
    if row_labels.len() != matrix.len() || col_labels.len() != n_cols {
        return Err(Error::validation("bicluster labels do not match matrix shape"));
    }
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("bicluster matrix has non-finite entries"));
    }
    let columns: Vec<Vec<f64>> = (0..n_cols).map(|j| matrix.iter().map(|r| r[j]).collect()).collect();
    let row_dendrogram = cluster_rows(matrix);
    let col_dendrogram = cluster_rows(&columns);
    Ok(Bicluster {
        row_labels: row_labels.to_vec(),
        col_labels: col_labels.to_vec(),
        row_order: row_dendrogram.leaf_order.clone(),
        col_order: col_dendrogram.leaf_order.clone(),
        row_dendrogram,
        col_dendrogram,
    })
}
