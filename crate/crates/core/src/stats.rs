//! Evaluation statistics: AUROC, Wilcoxon rank-sum, Bonferroni, Pearson.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Combined sample size up to which tie-free rank-sum tests are exact.
pub const EXACT_WILCOXON_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub auroc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Rank sum of the first sample.
    pub statistic: f64,
    pub p_value: f64,
    pub p_adjusted: Option<f64>,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Set when either input is constant; `r` is then 0.
    pub degenerate: bool,
}

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Sizes of the tie groups in `values`.
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Area under the ROC curve via the midrank Mann-Whitney statistic.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::validation(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.iter().filter(|&&l| l == 0).count();
    if n_pos + n_neg != labels.len() {
        return Err(Error::validation("labels must be 0 or 1"));
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation("AUROC needs both classes present"));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(RocResult { auroc: u / (n_pos as f64 * n_neg as f64), n_pos, n_neg })
}

/// Number of `m`-subsets of `{1..n}` with each possible rank sum, indexed by sum.
fn rank_sum_counts(m: usize, n: usize) -> Vec<u128> {
    let max_sum = n * (n + 1) / 2;
    // dp[k][s]: subsets of size k with sum s, over ranks seen so far
    let mut dp = vec![vec![0u128; max_sum + 1]; m + 1];
    dp[0][0] = 1;
    for rank in 1..=n {
        for k in (1..=m.min(rank)).rev() {
            for s in (rank..=max_sum).rev() {
                dp[k][s] += dp[k - 1][s - rank];
            }
        }
    }
    dp.swap_remove(m)
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test of `a` against `b`.
///
/// Exact null distribution when the pooled size is at most
/// [`EXACT_WILCOXON_MAX_N`] and there are no ties; otherwise the normal
/// approximation with tie and continuity corrections.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("rank-sum test needs two non-empty samples"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if pooled.iter().any(|v| v.is_nan()) {
        return Err(Error::validation("NaN in rank-sum sample"));
    }
    let (m, n) = (a.len(), pooled.len());
    let ranks = midranks(&pooled);
    let w: f64 = ranks[..m].iter().sum();
    let ties = tie_groups(&pooled);
    let tie_free = ties.iter().all(|&t| t == 1);

    if tie_free && n <= EXACT_WILCOXON_MAX_N {
        let counts = rank_sum_counts(m, n);
        let w_int = w.round() as usize;
        let total: u128 = counts.iter().sum();
        let le: u128 = counts[..=w_int].iter().sum();
        let ge: u128 = counts[w_int..].iter().sum();
        let p = ((2 * le.min(ge)) as f64 / total as f64).min(1.0);
        return Ok(TestResult { statistic: w, p_value: p, p_adjusted: None, exact: true });
    }

    Ok(normal_rank_sum(w, m, n, &ties))
}

/// The normal-approximation path of [`wilcoxon_rank_sum`], applied regardless
/// of sample size or ties.
pub fn wilcoxon_rank_sum_normal(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("rank-sum test needs two non-empty samples"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if pooled.iter().any(|v| v.is_nan()) {
        return Err(Error::validation("NaN in rank-sum sample"));
    }
    let w: f64 = midranks(&pooled)[..a.len()].iter().sum();
    Ok(normal_rank_sum(w, a.len(), pooled.len(), &tie_groups(&pooled)))
}

fn normal_rank_sum(w: f64, m: usize, n: usize, ties: &[usize]) -> TestResult {
    let (mf, nf) = (m as f64, (n - m) as f64);
    let u = w - mf * (mf + 1.0) / 2.0;
    let mean = mf * nf / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum::<f64>();
    let total = n as f64;
    let var = mf * nf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.sf(z)).min(1.0)
    };
    TestResult { statistic: w, p_value: p, p_adjusted: None, exact: false }
}

/// Bonferroni adjustment: `min(1, m * p)` with `m` the number of tests.
pub fn bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::validation(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len() as f64;
    Ok(p_values.iter().map(|&p| (m * p).min(1.0)).collect())
}

/// Pearson product-moment correlation, accumulated in one streaming pass.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::validation(format!("correlation of vectors of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::validation("correlation needs at least two points"));
    }
    let (mut mean_a, mut mean_b) = (0.0, 0.0);
    let (mut m2a, mut m2b, mut cab) = (0.0, 0.0, 0.0);
    for (k, (&x, &y)) in a.iter().zip(b).enumerate() {
        let n = (k + 1) as f64;
        let dx = x - mean_a;
        let dy = y - mean_b;
        let w = (n - 1.0) / n;
        mean_a += dx / n;
        mean_b += dy / n;
        m2a += dx * dx * w;
        m2b += dy * dy * w;
        // symmetric in (a, b): pearson(a, b) and pearson(b, a) agree bitwise
        cab += dx * dy * w;
    }
    let constant_a = a.iter().all(|&v| v == a[0]);
    let constant_b = b.iter().all(|&v| v == b[0]);
    if constant_a || constant_b || m2a <= 0.0 || m2b <= 0.0 {
        return Ok(Correlation { r: 0.0, degenerate: true });
    }
    let r = (cab / (m2a.sqrt() * m2b.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation { r, degenerate: false })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

/// Linear-interpolation quantile (the common "type 7" definition).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

pub fn normal_two_sided_p(z: f64) -> f64 {
    (2.0 * Normal::standard().sf(z.abs())).min(1.0)
}
