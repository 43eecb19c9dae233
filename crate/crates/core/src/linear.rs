//! Penalized logistic regression without intercept, coefficient-magnitude
//! importance, and the univariate Wald screen.
//!
//! The fitted objective is
//!
//! ```text
//! maximize  sum_i [ y_i * b'x_i - log(1 + exp(b'x_i)) ] - lambda * P(b)
//! ```
//!
//! with `P(b) = sum_j |b_j|` (lasso) or `P(b) = sum_j b_j^2` (ridge). Inputs
//! are expected to be standardized so the intercept is zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, LabeledDataset};
use crate::error::{Error, Result};
use crate::interpret::{ImportanceMethod, ImportanceReport};
use crate::par;
use crate::stats::normal_two_sided_p;

/// Largest absolute column mean accepted as "standardized".
pub const CENTERING_TOLERANCE: f64 = 1e-6;
const GRADIENT_TOLERANCE: f64 = 1e-8;
const STEP_TOLERANCE: f64 = 1e-8;
const MAX_OUTER_ITERATIONS: usize = 200;
/// Coefficient magnitude reported by the univariate screen under perfect separation.
pub const SEPARATION_BETA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    #[serde(rename = "penalty")]
    pub norm: Norm,
    pub lambda: f64,
}

impl PenaltyConfig {
    pub fn new(norm: Norm, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::validation(format!("penalty lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { norm, lambda })
    }

    pub fn l1(lambda: f64) -> Self {
        Self { norm: Norm::L1, lambda }
    }

    pub fn l2(lambda: f64) -> Self {
        Self { norm: Norm::L2, lambda }
    }

    pub fn value(&self, beta: &[f64]) -> f64 {
        let p: f64 = match self.norm {
            Norm::L1 => beta.iter().map(|b| b.abs()).sum(),
            Norm::L2 => beta.iter().map(|b| b * b).sum(),
        };
        self.lambda * p
    }

    /// The default tuning grid: lambda in {1e-4, 1e-3, 1e-2, 1e-1, 1} for each norm.
    pub fn default_grid() -> Vec<PenaltyConfig> {
        let lambdas = [0.0001, 0.001, 0.01, 0.1, 1.0];
        [Norm::L1, Norm::L2]
            .iter()
            .flat_map(|&norm| lambdas.iter().map(move |&lambda| PenaltyConfig { norm, lambda }))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    #[serde(flatten)]
    pub penalty: PenaltyConfig,
    pub beta: Vec<f64>,
    pub converged: bool,
    #[serde(default)]
    pub n_iterations: usize,
}

impl LinearModel {
    pub fn n_features(&self) -> usize {
        self.beta.len()
    }

    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        dot(&self.beta, row)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
#[inline]
fn log1p_exp(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Unpenalized log-likelihood.
pub fn log_likelihood(x: &FeatureMatrix, y: &[u8], beta: &[f64]) -> f64 {
    (0..x.n_rows())
        .map(|i| {
            let eta = dot(beta, x.row(i));
            f64::from(y[i]) * eta - log1p_exp(eta)
        })
        .sum()
}

/// Gradient of [`log_likelihood`]: `sum_i x_i (y_i - p_i)`.
pub fn log_likelihood_gradient(x: &FeatureMatrix, y: &[u8], beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.n_cols()];
    for i in 0..x.n_rows() {
        let row = x.row(i);
        let r = f64::from(y[i]) - sigmoid(dot(beta, row));
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
    }
    g
}

pub fn penalized_objective(x: &FeatureMatrix, y: &[u8], beta: &[f64], penalty: &PenaltyConfig) -> f64 {
    log_likelihood(x, y, beta) - penalty.value(beta)
}

fn check_fit_inputs(train: &LabeledDataset) -> Result<()> {
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::validation("logistic fit needs both classes present"));
    }
    let n = train.n_rows() as f64;
    for j in 0..train.n_cols() {
        let mean = (0..train.n_rows()).map(|i| train.x.value(i, j)).sum::<f64>() / n;
        if mean.abs() > CENTERING_TOLERANCE {
            return Err(Error::validation(format!(
                "column '{}' has mean {mean:.3e}; standardize before fitting",
                train.meta[j].name
            )));
        }
    }
    Ok(())
}

/// Fits the penalized model: damped Newton for ridge, proximal Newton with
/// cyclic soft-thresholding coordinate descent for lasso.
pub fn fit_logistic(train: &LabeledDataset, penalty: &PenaltyConfig) -> Result<LinearModel> {
    PenaltyConfig::new(penalty.norm, penalty.lambda)?;
    check_fit_inputs(train)?;
    let (beta, converged, n_iterations) = match penalty.norm {
        Norm::L2 => newton_ridge(&train.x, &train.y, penalty.lambda),
        Norm::L1 => prox_newton_lasso(&train.x, &train.y, penalty.lambda),
    };
    Ok(LinearModel { penalty: *penalty, beta, converged, n_iterations })
}

/// Weighted Gram matrix `X' diag(w) X`.
fn weighted_gram(x: &FeatureMatrix, w: &[f64]) -> DMatrix<f64> {
    let d = x.n_cols();
    let mut h = DMatrix::zeros(d, d);
    for i in 0..x.n_rows() {
        let row = x.row(i);
        for a in 0..d {
            let wa = w[i] * row[a];
            if wa == 0.0 {
                continue;
            }
            for b in a..d {
                h[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    h
}

fn newton_ridge(x: &FeatureMatrix, y: &[u8], lambda: f64) -> (Vec<f64>, bool, usize) {
    let d = x.n_cols();
    let penalty = PenaltyConfig::l2(lambda);
    let mut beta = vec![0.0; d];
    let mut obj = penalized_objective(x, y, &beta, &penalty);
    for iter in 1..=MAX_OUTER_ITERATIONS {
        let mut g = log_likelihood_gradient(x, y, &beta);
        for (gj, bj) in g.iter_mut().zip(&beta) {
            *gj -= 2.0 * lambda * bj;
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < GRADIENT_TOLERANCE {
            return (beta, true, iter - 1);
        }
        let w: Vec<f64> = (0..x.n_rows())
            .map(|i| {
                let p = sigmoid(dot(&beta, x.row(i)));
                p * (1.0 - p)
            })
            .collect();
        let mut h = weighted_gram(x, &w);
        for a in 0..d {
            h[(a, a)] += 2.0 * lambda;
        }
        let rhs = DVector::from_vec(g.clone());
        let step = solve_spd(h, &rhs);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            let cand_obj = penalized_objective(x, y, &cand, &penalty);
            if cand_obj >= obj - 1e-12 * obj.abs().max(1.0) {
                beta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || t * step.norm() < 1e-15 {
            let done = gnorm < GRADIENT_TOLERANCE;
            return (beta, done, iter);
        }
    }
    (beta, false, MAX_OUTER_ITERATIONS)
}

/// Solves `h * s = rhs` for symmetric positive (semi)definite `h`, adding
/// diagonal jitter when the factorization fails.
fn solve_spd(h: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut hj = h.clone();
        for i in 0..hj.nrows() {
            hj[(i, i)] += jitter;
        }
        if let Some(chol) = hj.cholesky() {
            return chol.solve(rhs);
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 100.0 };
    }
    DVector::zeros(rhs.len())
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn prox_newton_lasso(x: &FeatureMatrix, y: &[u8], lambda: f64) -> (Vec<f64>, bool, usize) {
    let (n, d) = (x.n_rows(), x.n_cols());
    let penalty = PenaltyConfig::l1(lambda);
    let cols: Vec<Vec<f64>> = (0..d).map(|j| x.column(j)).collect();
    let mut beta = vec![0.0; d];
    let mut obj = penalized_objective(x, y, &beta, &penalty);

    for iter in 1..=MAX_OUTER_ITERATIONS {
        let p: Vec<f64> = (0..n).map(|i| sigmoid(dot(&beta, x.row(i)))).collect();
        let w: Vec<f64> = p.iter().map(|&pi| (pi * (1.0 - pi)).max(1e-10)).collect();
        let g: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().zip(y).zip(&p).map(|((xv, &yv), pv)| xv * (f64::from(yv) - pv)).sum())
            .collect();
        let a: Vec<f64> = cols.iter().map(|c| c.iter().zip(&w).map(|(xv, wv)| wv * xv * xv).sum()).collect();

        // coordinate descent on the local quadratic model
        let mut b = beta.clone();
        let mut u = vec![0.0; n]; // X (b - beta)
        for _sweep in 0..1000 {
            let mut max_change: f64 = 0.0;
            for j in 0..d {
                if a[j] <= 0.0 {
                    if b[j] != 0.0 {
                        b[j] = 0.0;
                    }
                    continue;
                }
                let hd: f64 = cols[j].iter().zip(&w).zip(&u).map(|((xv, wv), uv)| xv * wv * uv).sum();
                let c = g[j] - hd + a[j] * (b[j] - beta[j]);
                let new = soft_threshold(a[j] * beta[j] + c, lambda) / a[j];
                let delta = new - b[j];
                if delta != 0.0 {
                    for (ui, xv) in u.iter_mut().zip(&cols[j]) {
                        *ui += delta * xv;
                    }
                    b[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < 1e-12 {
                break;
            }
        }

        let dir: Vec<f64> = b.iter().zip(&beta).map(|(bn, bo)| bn - bo).collect();
        let dir_max = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dir_max < STEP_TOLERANCE {
            beta = b;
            return (beta, true, iter);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = beta.iter().zip(&dir).map(|(bo, dv)| bo + t * dv).collect();
            let cand_obj = penalized_objective(x, y, &cand, &penalty);
            if cand_obj >= obj - 1e-12 * obj.abs().max(1.0) {
                beta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return (beta, false, iter);
        }
        if t * dir_max < STEP_TOLERANCE {
            return (beta, true, iter);
        }
    }
    (beta, false, MAX_OUTER_ITERATIONS)
}

/// Probability of the positive class for every row.
pub fn predict_proba_linear(model: &LinearModel, x: &FeatureMatrix) -> Result<Vec<f64>> {
    if x.n_cols() != model.beta.len() {
        return Err(Error::validation(format!(
            "model has {} coefficients, matrix has {} columns",
            model.beta.len(),
            x.n_cols()
        )));
    }
    Ok((0..x.n_rows()).map(|i| sigmoid(model.linear_predictor(x.row(i)))).collect())
}

/// `|beta_j|` per feature.
pub fn coefficient_importance(model: &LinearModel, feature_names: &[String]) -> Result<ImportanceReport> {
    if feature_names.len() != model.beta.len() {
        return Err(Error::validation("feature name count does not match coefficient count"));
    }
    let mut report = ImportanceReport::new(
        ImportanceMethod::Coefficient,
        feature_names.to_vec(),
        model.beta.iter().map(|b| b.abs()).collect(),
    )?;
    report.model = Some("lr".into());
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateResult {
    pub beta_hat: f64,
    pub p_value: f64,
    pub significant: bool,
    pub separation_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateScreen {
    pub results: Vec<UnivariateResult>,
    pub report: ImportanceReport,
}

/// One-predictor logistic fit (no intercept) with a Wald test.
pub fn fit_univariate(x: &[f64], y: &[u8], alpha: f64) -> UnivariateResult {
    let constant = x.iter().all(|&v| v == x[0]);
    if constant {
        return UnivariateResult { beta_hat: 0.0, p_value: 1.0, significant: false, separation_flag: false };
    }
    let nonzero = || x.iter().zip(y).filter(|(&v, _)| v != 0.0);
    let agrees_pos = nonzero().all(|(&v, &l)| (v > 0.0) == (l == 1));
    let agrees_neg = nonzero().all(|(&v, &l)| (v > 0.0) == (l == 0));
    if agrees_pos || agrees_neg {
        let sign = if agrees_pos { 1.0 } else { -1.0 };
        return UnivariateResult {
            beta_hat: sign * SEPARATION_BETA,
            p_value: 0.0,
            significant: 0.0 < alpha,
            separation_flag: true,
        };
    }

    let loglik = |b: f64| -> f64 {
        x.iter().zip(y).map(|(&v, &l)| f64::from(l) * b * v - log1p_exp(b * v)).sum()
    };
    let derivs = |b: f64| -> (f64, f64) {
        x.iter().zip(y).fold((0.0, 0.0), |(g, h), (&v, &l)| {
            let p = sigmoid(b * v);
            (g + v * (f64::from(l) - p), h + v * v * p * (1.0 - p))
        })
    };
    let mut beta = 0.0;
    let mut ll = loglik(beta);
    for _ in 0..200 {
        let (g, h) = derivs(beta);
        if g.abs() < 1e-12 * (1.0 + x.len() as f64) || h <= 0.0 {
            break;
        }
        let step = g / h;
        let mut t = 1.0;
        while t > 1e-12 {
            let cand = beta + t * step;
            let cll = loglik(cand);
            if cll >= ll - 1e-14 * ll.abs() {
                beta = cand;
                ll = cll;
                break;
            }
            t *= 0.5;
        }
        if (t * step).abs() < 1e-14 {
            break;
        }
    }
    let (_, info) = derivs(beta);
    let p_value = if info > 0.0 { normal_two_sided_p(beta * info.sqrt()) } else { 1.0 };
    UnivariateResult { beta_hat: beta, p_value, significant: p_value < alpha, separation_flag: false }
}

/// Per-feature marginal effect, zeroed when its Wald p-value is not below `alpha`.
pub fn univariate_screen(train: &LabeledDataset, alpha: f64) -> Result<UnivariateScreen> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("alpha {alpha} not in (0, 1)")));
    }
    let results = par::map_range(train.n_cols(), |j| fit_univariate(&train.x.column(j), &train.y, alpha));
    let scores = results.iter().map(|r| if r.significant { r.beta_hat.abs() } else { 0.0 }).collect();
    let report = ImportanceReport::new(ImportanceMethod::Univariate, train.feature_names(), scores)?;
    Ok(UnivariateScreen { results, report })
}
