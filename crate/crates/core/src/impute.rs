//! Missing-value imputation: column means and softImpute matrix completion.
//!
//! softImpute works on the column-centered matrix and repeats
//!
//! ```text
//! Z <- S_lambda( P_obs(X) + P_miss(Z) )
//! ```
//!
//! where `S_lambda` soft-thresholds singular values by `lambda` and keeps at
//! most `max_rank` of them. Each step minimizes a majorizer of
//! `1/2 ||P_obs(X - Z)||_F^2 + lambda ||Z||_*` over rank-`max_rank` matrices,
//! so that objective never increases.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftImputeConfig {
    /// Singular-value threshold `lambda`.
    pub shrinkage: f64,
    pub max_rank: usize,
    /// Stop once `||Z_new - Z_old||_F / ||Z_old||_F` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SoftImputeConfig {
    pub fn new(shrinkage: f64, max_rank: usize) -> Self {
        Self { shrinkage, max_rank, tolerance: 1e-5, max_iterations: 200 }
    }

    fn validate(&self, n: usize, d: usize) -> Result<()> {
        if !(self.shrinkage >= 0.0 && self.shrinkage.is_finite()) {
            return Err(Error::validation(format!("shrinkage {} must be finite and >= 0", self.shrinkage)));
        }
        if self.max_rank == 0 || self.max_rank > n.min(d) {
            return Err(Error::validation(format!("max_rank {} not in 1..={}", self.max_rank, n.min(d))));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::validation("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::validation("max_iterations must be positive"));
        }
        Ok(())
    }
}

/// Frozen low-rank factors for filling rows not seen during fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftImputeModel {
    pub means: Vec<f64>,
    /// Right singular vectors, one per retained component, each of length d.
    pub components: Vec<Vec<f64>>,
    /// Shrunk-over-raw singular value ratio per component.
    pub factors: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftImputeFit {
    pub completed: FeatureMatrix,
    pub converged: bool,
    pub iterations: usize,
    /// Surrogate objective after each iteration.
    pub objective_trace: Vec<f64>,
    /// Rank of the final reconstruction.
    pub rank: usize,
    pub model: SoftImputeModel,
}

/// Mean of the observed entries of each column; errors on an all-missing column.
pub fn observed_means(x: &FeatureMatrix) -> Result<Vec<f64>> {
    (0..x.n_cols())
        .map(|j| {
            let obs: Vec<f64> = x.column(j).into_iter().filter(|v| !v.is_nan()).collect();
            if obs.is_empty() {
                Err(Error::validation(format!("column {j} has no observed values")))
            } else {
                Ok(obs.iter().sum::<f64>() / obs.len() as f64)
            }
        })
        .collect()
}

fn fill_with(x: &FeatureMatrix, means: &[f64]) -> Result<FeatureMatrix> {
    let d = x.n_cols();
    let values = x.values().iter().enumerate().map(|(k, &v)| if v.is_nan() { means[k % d] } else { v }).collect();
    FeatureMatrix::new(x.n_rows(), d, values)
}

/// Replaces each missing cell with its column's observed mean.
pub fn mean_impute(x: &FeatureMatrix) -> Result<FeatureMatrix> {
    fill_with(x, &observed_means(x)?)
}

fn centered(x: &FeatureMatrix, means: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.n_rows(), x.n_cols(), |i, j| {
        let v = x.value(i, j);
        if v.is_nan() { 0.0 } else { v - means[j] }
    })
}

/// Largest singular value of the centered, mean-filled matrix.
pub fn leading_singular_value(x: &FeatureMatrix) -> Result<f64> {
    let means = observed_means(x)?;
    let a = centered(x, &means);
    Ok(a.singular_values().iter().copied().fold(0.0, f64::max))
}

struct Thresholded {
    z: DMatrix<f64>,
    nuclear: f64,
    components: Vec<Vec<f64>>,
    factors: Vec<f64>,
}

fn svd_soft_threshold(w: &DMatrix<f64>, lambda: f64, max_rank: usize) -> Thresholded {
    let svd = w.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut z = DMatrix::zeros(w.nrows(), w.ncols());
    let mut nuclear = 0.0;
    let mut components = Vec::new();
    let mut factors = Vec::new();
    for &k in order.iter().take(max_rank) {
        let s = svd.singular_values[k];
        let shrunk = s - lambda;
        if shrunk <= 0.0 {
            break;
        }
        z += u.column(k) * vt.row(k) * shrunk;
        nuclear += shrunk;
        components.push(vt.row(k).iter().copied().collect());
        factors.push(shrunk / s);
    }
    Thresholded { z, nuclear, components, factors }
}

/// Fits softImpute to `x`; observed cells of the result equal the input bit for bit.
pub fn soft_impute(x: &FeatureMatrix, config: &SoftImputeConfig) -> Result<SoftImputeFit> {
    let (n, d) = (x.n_rows(), x.n_cols());
    config.validate(n, d)?;
    let means = observed_means(x)?;
    let observed: Vec<bool> = x.values().iter().map(|v| !v.is_nan()).collect();
    let xc = centered(x, &means);
    let obs = |i: usize, j: usize| observed[i * d + j];

    let mut z_old = DMatrix::<f64>::zeros(n, d);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last = None;
    for _ in 0..config.max_iterations {
        let w = DMatrix::from_fn(n, d, |i, j| if obs(i, j) { xc[(i, j)] } else { z_old[(i, j)] });
        let step = svd_soft_threshold(&w, config.shrinkage, config.max_rank);
        let mut resid = 0.0;
        for i in 0..n {
            for j in 0..d {
                if obs(i, j) {
                    resid += (xc[(i, j)] - step.z[(i, j)]).powi(2);
                }
            }
        }
        trace.push(0.5 * resid + config.shrinkage * step.nuclear);
        let change = (&step.z - &z_old).norm();
        let scale = z_old.norm();
        z_old = step.z.clone();
        last = Some(step);
        if change == 0.0 || (scale > 0.0 && change / scale < config.tolerance) {
            converged = true;
            break;
        }
    }
    let step = last.expect("at least one iteration");
    if !converged {
        log::warn!("softImpute stopped after {} iterations without converging", config.max_iterations);
    }
    let values = x
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| if v.is_nan() { step.z[(k / d, k % d)] + means[k % d] } else { v })
        .collect();
    Ok(SoftImputeFit {
        completed: FeatureMatrix::new(n, d, values)?,
        converged,
        iterations: trace.len(),
        objective_trace: trace,
        rank: step.components.len(),
        model: SoftImputeModel {
            means,
            components: step.components,
            factors: step.factors,
            tolerance: config.tolerance,
            max_iterations: config.max_iterations,
        },
    })
}

impl SoftImputeModel {
    /// Fills each row's missing cells by iterating `z_M <- (V diag(f) V^T z)_M`
    /// against the frozen factors; observed cells are kept.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        let d = self.means.len();
        if x.n_cols() != d {
            return Err(Error::validation(format!("imputer fitted on {d} columns, got {}", x.n_cols())));
        }
        let mut out = Vec::with_capacity(x.n_rows() * d);
        for i in 0..x.n_rows() {
            let row = x.row(i);
            let missing: Vec<usize> = (0..d).filter(|&j| row[j].is_nan()).collect();
            let mut z: Vec<f64> = row.iter().zip(&self.means).map(|(&v, m)| if v.is_nan() { 0.0 } else { v - m }).collect();
            if !missing.is_empty() {
                for _ in 0..self.max_iterations {
                    let proj = self.project(&z);
                    let mut change = 0.0;
                    for &j in &missing {
                        change += (proj[j] - z[j]).powi(2);
                        z[j] = proj[j];
                    }
                    let norm: f64 = z.iter().map(|v| v * v).sum();
                    if change == 0.0 || change.sqrt() < self.tolerance * norm.sqrt() {
                        break;
                    }
                }
            }
            out.extend(row.iter().enumerate().map(|(j, &v)| if v.is_nan() { z[j] + self.means[j] } else { v }));
        }
        FeatureMatrix::new(x.n_rows(), d, out)
    }

    fn project(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; z.len()];
        for (v, f) in self.components.iter().zip(&self.factors) {
            let coef = f * v.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            for (o, a) in out.iter_mut().zip(v) {
                *o += coef * a;
            }
        }
        out
    }
}

/// Imputation applied inside an experiment. The softImpute threshold is a
/// fraction of the leading singular value of the scaled, mean-filled training block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ImputationConfig {
    Mean,
    Soft {
        #[serde(default = "default_fraction")]
        shrinkage_fraction: f64,
        /// Defaults to `min(N, d)` of the training block.
        #[serde(default)]
        max_rank: Option<usize>,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
}

fn default_fraction() -> f64 {
    0.1
}
fn default_tol() -> f64 {
    1e-5
}
fn default_max_iter() -> usize {
    200
}

impl Default for ImputationConfig {
    fn default() -> Self {
        ImputationConfig::Soft { shrinkage_fraction: default_fraction(), max_rank: None, tol: default_tol(), max_iter: default_max_iter() }
    }
}

/// Imputer state learned from training rows only.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedImputer {
    Mean(Vec<f64>),
    Soft { scales: Vec<f64>, model: SoftImputeModel },
}

fn observed_scales(x: &FeatureMatrix, means: &[f64]) -> Vec<f64> {
    (0..x.n_cols())
        .map(|j| {
            let obs: Vec<f64> = x.column(j).into_iter().filter(|v| !v.is_nan()).collect();
            let var = obs.iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / obs.len() as f64;
            if var > 0.0 { var.sqrt() } else { 1.0 }
        })
        .collect()
}

fn scale_cols(x: &FeatureMatrix, scales: &[f64]) -> Result<FeatureMatrix> {
    let d = x.n_cols();
    FeatureMatrix::new(x.n_rows(), d, x.values().iter().enumerate().map(|(k, v)| v / scales[k % d]).collect())
}

/// Restores original units for imputed cells and copies observed cells from `orig`.
fn unscale_into(orig: &FeatureMatrix, filled: &FeatureMatrix, scales: &[f64]) -> Result<FeatureMatrix> {
    let d = orig.n_cols();
    let values = orig
        .values()
        .iter()
        .zip(filled.values())
        .enumerate()
        .map(|(k, (&o, &f))| if o.is_nan() { f * scales[k % d] } else { o })
        .collect();
    FeatureMatrix::new(orig.n_rows(), d, values)
}

/// Fits an imputer on `train` and returns the completed training matrix.
pub fn fit_imputer(train: &FeatureMatrix, config: &ImputationConfig) -> Result<(FeatureMatrix, FittedImputer)> {
    match config {
        ImputationConfig::Mean => {
            let means = observed_means(train)?;
            Ok((fill_with(train, &means)?, FittedImputer::Mean(means)))
        }
        ImputationConfig::Soft { shrinkage_fraction, max_rank, tol, max_iter } => {
            if !(*shrinkage_fraction >= 0.0) {
                return Err(Error::validation("shrinkage_fraction must be >= 0"));
            }
            let scales = observed_scales(train, &observed_means(train)?);
            let scaled = scale_cols(train, &scales)?;
            let sigma1 = leading_singular_value(&scaled)?;
            let rank = max_rank.unwrap_or(train.n_rows().min(train.n_cols()));
            let cfg = SoftImputeConfig {
                shrinkage: shrinkage_fraction * sigma1,
                max_rank: rank,
                tolerance: *tol,
                max_iterations: *max_iter,
            };
            let fit = soft_impute(&scaled, &cfg)?;
            let completed = unscale_into(train, &fit.completed, &scales)?;
            Ok((completed, FittedImputer::Soft { scales, model: fit.model }))
        }
    }
}

impl FittedImputer {
    /// Fills held-out rows using only state learned at fit time.
    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        match self {
            FittedImputer::Mean(means) => {
                if means.len() != x.n_cols() {
                    return Err(Error::validation("imputer column count mismatch"));
                }
                fill_with(x, means)
            }
            FittedImputer::Soft { scales, model } => {
                if scales.len() != x.n_cols() {
                    return Err(Error::validation("imputer column count mismatch"));
                }
                let filled = model.transform(&scale_cols(x, scales)?)?;
                unscale_into(x, &filled, scales)
            }
        }
    }
}
