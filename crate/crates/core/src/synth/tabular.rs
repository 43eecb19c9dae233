use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, FeatureMeta, RawDataset};
use crate::error::{Error, Result};
use crate::linear::sigmoid;
use crate::{par, seed};

/// Features sharing a latent factor, so each pair has correlation `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedBlock {
    pub features: Vec<usize>,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    /// `sign(x_a * x_b)`
    SignProduct,
    /// `x_a * x_b`
    Product,
}

/// Extra log-odds term `weight * g(x_a, x_b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Tabular generator with planted log-odds
/// `intercept + beta . x + sum of interaction terms`.
///
/// Features are standard normal unless listed in `binary_features`
/// (Bernoulli(1/2) on {0, 1}) or given a level count in `categorical_specs`
/// (uniform integer codes `0..levels`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub planted_beta: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub correlated_blocks: Vec<CorrelatedBlock>,
    /// Empty, or one entry per feature.
    #[serde(default)]
    pub categorical_specs: Vec<Option<usize>>,
    #[serde(default)]
    pub binary_features: Vec<usize>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub missing_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dist {
    Gaussian,
    Binary,
    Categorical(usize),
}

impl TabularSpec {
    /// `n_informative` leading features with coefficients alternating
    /// `+effect, -effect`; the remaining features are noise.
    pub fn planted(n_samples: usize, n_features: usize, n_informative: usize, effect: f64, seed: u64) -> Self {
        let planted_beta = (0..n_features)
            .map(|j| if j < n_informative { if j % 2 == 0 { effect } else { -effect } } else { 0.0 })
            .collect();
        Self {
            n_samples,
            n_features,
            planted_beta,
            intercept: 0.0,
            correlated_blocks: Vec::new(),
            categorical_specs: Vec::new(),
            binary_features: Vec::new(),
            interactions: Vec::new(),
            missing_rate: 0.0,
            seed,
        }
    }

    fn dists(&self) -> Vec<Dist> {
        (0..self.n_features)
            .map(|j| {
                if let Some(Some(l)) = self.categorical_specs.get(j) {
                    Dist::Categorical(*l)
                } else if self.binary_features.contains(&j) {
                    Dist::Binary
                } else {
                    Dist::Gaussian
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.n_features;
        if self.n_samples == 0 || d == 0 {
            return Err(Error::validation("n_samples and n_features must be positive"));
        }
        if self.planted_beta.len() != d {
            return Err(Error::validation(format!("planted_beta has {} entries for {d} features", self.planted_beta.len())));
        }
        if self.planted_beta.iter().any(|b| !b.is_finite()) || !self.intercept.is_finite() {
            return Err(Error::validation("planted coefficients must be finite"));
        }
        if !self.categorical_specs.is_empty() && self.categorical_specs.len() != d {
            return Err(Error::validation("categorical_specs must be empty or cover every feature"));
        }
        if self.categorical_specs.iter().flatten().any(|&l| l < 2) {
            return Err(Error::validation("categorical features need at least 2 levels"));
        }
        if self.binary_features.iter().any(|&j| j >= d) {
            return Err(Error::validation("binary feature index out of range"));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::validation(format!("missing_rate {} not in [0, 1)", self.missing_rate)));
        }
        let dists = self.dists();
        let mut owner = vec![false; d];
        for block in &self.correlated_blocks {
            if !(0.0..1.0).contains(&block.rho) {
                return Err(Error::validation(format!(
                    "correlation {} is infeasible for an equicorrelated block (need 0 <= rho < 1)",
                    block.rho
                )));
            }
            for &j in &block.features {
                if j >= d || owner[j] {
                    return Err(Error::validation("correlated blocks must use distinct in-range features"));
                }
                if dists[j] != Dist::Gaussian {
                    return Err(Error::validation(format!("feature {j} in a correlated block must be Gaussian")));
                }
                owner[j] = true;
            }
        }
        for it in &self.interactions {
            if it.a >= d || it.b >= d || !it.weight.is_finite() {
                return Err(Error::validation("interaction refers to an unknown feature or has a non-finite weight"));
            }
        }
        Ok(())
    }

    /// Log-odds of the label given a complete feature row.
    pub fn log_odds(&self, row: &[f64]) -> f64 {
        let mut eta = self.intercept + self.planted_beta.iter().zip(row).map(|(b, x)| b * x).sum::<f64>();
        for it in &self.interactions {
            let p = row[it.a] * row[it.b];
            eta += it.weight
                * match it.kind {
                    InteractionKind::SignProduct => p.signum() * f64::from(u8::from(p != 0.0)),
                    InteractionKind::Product => p,
                };
        }
        eta
    }

    /// Variance of `beta . x` for Gaussian-only specs without interactions.
    fn score_variance(&self) -> Result<f64> {
        if !self.interactions.is_empty() || self.dists().iter().any(|d| *d != Dist::Gaussian) {
            return Err(Error::validation("analytic quantities need Gaussian features and no interactions"));
        }
        let b = &self.planted_beta;
        let mut var: f64 = b.iter().map(|v| v * v).sum();
        for block in &self.correlated_blocks {
            let s: f64 = block.features.iter().map(|&j| b[j]).sum();
            let sq: f64 = block.features.iter().map(|&j| b[j] * b[j]).sum();
            var += block.rho * (s * s - sq);
        }
        Ok(var)
    }
}

/// Generates the dataset row by row; row `i` uses its own RNG substream.
pub fn generate_tabular(spec: &TabularSpec) -> Result<RawDataset> {
    spec.validate()?;
    let d = spec.n_features;
    let dists = spec.dists();
    let mut block_of = vec![None; d];
    for (k, block) in spec.correlated_blocks.iter().enumerate() {
        for &j in &block.features {
            block_of[j] = Some(k);
        }
    }
    let rows: Vec<(Vec<f64>, u8)> = par::map_range(spec.n_samples, |i| {
        let mut rng = seed::rng(spec.seed, &[i as u64]);
        let latent: Vec<f64> = spec.correlated_blocks.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut row = vec![0.0; d];
        for j in 0..d {
            row[j] = match dists[j] {
                Dist::Gaussian => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    match block_of[j] {
                        Some(k) => {
                            let rho = spec.correlated_blocks[k].rho;
                            rho.sqrt() * latent[k] + (1.0 - rho).sqrt() * e
                        }
                        None => e,
                    }
                }
                Dist::Binary => f64::from(u8::from(rng.random_bool(0.5))),
                Dist::Categorical(l) => rng.random_range(0..l) as f64,
            };
        }
        let y = u8::from(rng.random::<f64>() < sigmoid(spec.log_odds(&row)));
        if spec.missing_rate > 0.0 {
            for v in row.iter_mut() {
                if rng.random::<f64>() < spec.missing_rate {
                    *v = f64::NAN;
                }
            }
        }
        (row, y)
    });
    let meta = (0..d)
        .map(|j| {
            let name = format!("x{j}");
            match dists[j] {
                Dist::Gaussian => FeatureMeta::continuous(name),
                Dist::Binary => FeatureMeta::binary(name),
                Dist::Categorical(l) => FeatureMeta::categorical(name, l),
            }
        })
        .collect();
    let y = rows.iter().map(|r| r.1).collect();
    let x = FeatureMatrix::new(spec.n_samples, d, rows.into_iter().flat_map(|r| r.0).collect())?;
    RawDataset::new(x, y, meta)
}

const QUAD_POINTS: usize = 20_001;
const QUAD_HALF_WIDTH: f64 = 10.0;

/// Standard normal grid `(z, weight)` for trapezoid quadrature.
fn normal_grid() -> impl Iterator<Item = (f64, f64)> {
    let h = 2.0 * QUAD_HALF_WIDTH / (QUAD_POINTS - 1) as f64;
    (0..QUAD_POINTS).map(move |k| {
        let z = -QUAD_HALF_WIDTH + k as f64 * h;
        let w = if k == 0 || k == QUAD_POINTS - 1 { 0.5 } else { 1.0 };
        (z, w * h * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
    })
}

/// `E[logistic(intercept + beta . x)]` for Gaussian-only specs.
pub fn expected_label_rate(spec: &TabularSpec) -> Result<f64> {
    spec.validate()?;
    let sd = spec.score_variance()?.sqrt();
    Ok(normal_grid().map(|(z, w)| w * sigmoid(spec.intercept + sd * z)).sum())
}

/// AUROC of the true log-odds as a score, for Gaussian-only specs.
///
/// With `s = beta . x ~ N(0, v)`, cases have density proportional to
/// `phi(s) p(s)` and controls to `phi(s) (1 - p(s))`; the AUROC is
/// `P(s_case > s_control)`.
pub fn bayes_auroc(spec: &TabularSpec) -> Result<f64> {
    spec.validate()?;
    let sd = spec.score_variance()?.sqrt();
    if sd == 0.0 {
        return Ok(0.5);
    }
    let (mut pos_mass, mut neg_mass, mut pairs) = (0.0, 0.0, 0.0);
    for (z, w) in normal_grid() {
        let p = sigmoid(spec.intercept + sd * z);
        let (fp, fn_) = (w * p, w * (1.0 - p));
        // controls strictly below this point, plus half the tie at it
        pairs += fp * (neg_mass + 0.5 * fn_);
        pos_mass += fp;
        neg_mass += fn_;
    }
    Ok(pairs / (pos_mass * neg_mass))
}
