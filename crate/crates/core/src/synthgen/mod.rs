//! Synthetic small-n-large-p data with a known sparse ground truth.
//!
//! Features are standard normal, optionally correlated within consecutive
//! blocks: `x_ij = √ρ·z_{i,b} + √(1-ρ)·e_ij` with one shared factor per
//! block. Draw order, per sample: for each feature, draw the block factor
//! when the feature opens a new block, then the feature's own noise; then
//! one uniform for the label. The label is Bernoulli(σ(score)) under the
//! logistic model, or `score ≥ 0` flipped with probability ε under the
//! margin model.

pub mod oracle;
mod simplex;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::dataset::{self, Dataset, DatasetError};
use crate::rng::SeededRng;

pub use oracle::{oracle_minimize, OracleError, OracleOptions, OracleSolution};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("writing ground truth: {0}")]
    Io(#[from] std::io::Error),
    #[error("ground truth JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SynthError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Labels drawn as Bernoulli(σ(score)).
    Logistic,
    /// Labels `score ≥ 0`, each flipped with probability `flip_probability`.
    Margin { flip_probability: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    /// `(feature index, true weight)` pairs.
    pub support: Vec<(usize, f64)>,
    #[serde(default)]
    pub intercept: f64,
    pub noise: NoiseModel,
    /// Within-block correlation ρ in `[0, 1)`.
    #[serde(default)]
    pub feature_correlation: f64,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    pub seed: u64,
}

fn default_block_size() -> usize {
    10
}

impl SyntheticSpec {
    /// Independent features, no intercept.
    pub fn new(m: usize, n: usize, support: Vec<(usize, f64)>, noise: NoiseModel, seed: u64) -> Self {
        Self {
            m,
            n,
            support,
            intercept: 0.0,
            noise,
            feature_correlation: 0.0,
            block_size: default_block_size(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.m == 0 || self.n == 0 {
            return bad("m and n must be positive".into());
        }
        let mut seen = vec![false; self.n];
        for &(j, w) in &self.support {
            if j >= self.n {
                return bad(format!("support index {j} out of range for n = {}", self.n));
            }
            if seen[j] {
                return bad(format!("support index {j} listed twice"));
            }
            seen[j] = true;
            if !w.is_finite() {
                return bad(format!("support weight for {j} is not finite"));
            }
        }
        if let NoiseModel::Margin { flip_probability } = self.noise {
            if !(0.0..0.5).contains(&flip_probability) {
                return bad(format!("flip probability {flip_probability} outside [0, 0.5)"));
            }
        }
        if !(0.0..1.0).contains(&self.feature_correlation) {
            return bad(format!("correlation {} outside [0, 1)", self.feature_correlation));
        }
        if self.block_size == 0 {
            return bad("block size must be positive".into());
        }
        if !self.intercept.is_finite() {
            return bad("intercept must be finite".into());
        }
        Ok(())
    }

    pub fn true_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n];
        for &(j, v) in &self.support {
            w[j] = v;
        }
        w
    }

    pub fn support_indices(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.support.iter().map(|&(j, _)| j).collect();
        s.sort_unstable();
        s
    }

    fn in_same_block(&self, a: usize, b: usize) -> bool {
        a / self.block_size == b / self.block_size
    }

    fn covariance(&self, a: usize, b: usize) -> f64 {
        if a == b {
            1.0
        } else if self.in_same_block(a, b) {
            self.feature_correlation
        } else {
            0.0
        }
    }
}

/// What the generator knows about its own labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Accuracy of the rule `score ≥ 0` on fresh draws from the generator.
    pub bayes_accuracy: f64,
    pub spec: SyntheticSpec,
}

impl GroundTruth {
    pub fn score(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    /// The Bayes-optimal label for a feature row.
    pub fn bayes_label(&self, row: ndarray::ArrayView1<f64>) -> u8 {
        u8::from(self.score(row) >= 0.0)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Draws a dataset (names `f0..`, ids `s0..`) and its ground truth.
pub fn generate(spec: &SyntheticSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let w = spec.true_weights();
    let rho = spec.feature_correlation;
    let (shared, own) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut x = Array2::zeros((spec.m, spec.n));
    let mut labels = Vec::with_capacity(spec.m);
    for i in 0..spec.m {
        let mut factor = 0.0;
        let mut score = spec.intercept;
        for j in 0..spec.n {
            if j % spec.block_size == 0 {
                factor = rng.normal();
            }
            let v = shared * factor + own * rng.normal();
            x[[i, j]] = v;
            score += w[j] * v;
        }
        let u = rng.uniform();
        let y = match spec.noise {
            NoiseModel::Logistic => u < crate::objectives::sigmoid(score),
            NoiseModel::Margin { flip_probability } => (score >= 0.0) != (u < flip_probability),
        };
        labels.push(u8::from(y));
    }
    let d = Dataset::from_matrix(x, labels)?;
    let truth = GroundTruth {
        weights: w,
        intercept: spec.intercept,
        bayes_accuracy: bayes_accuracy(spec),
        spec: spec.clone(),
    };
    Ok((d, truth))
}

/// Writes `data` as CSV (`id`, features, `label`) and the ground truth as JSON.
pub fn persist(d: &Dataset, truth: &GroundTruth, csv_path: impl AsRef<Path>, truth_path: impl AsRef<Path>) -> Result<()> {
    dataset::save_csv(d, csv_path, "id", "label")?;
    truth.write_json(truth_path)
}

/// Bayes accuracy using every feature.
pub fn bayes_accuracy(spec: &SyntheticSpec) -> f64 {
    if let NoiseModel::Margin { flip_probability } = spec.noise {
        return 1.0 - flip_probability;
    }
    let all: Vec<usize> = (0..spec.n).collect();
    bayes_accuracy_subset(spec, &all)
}

/// Best achievable accuracy for a classifier that only sees the features in
/// `subset`.
///
/// Given `x_S`, the score is Gaussian with mean `t = E[score | x_S]` and a
/// residual variance `v`; `t` itself is Gaussian over the population. The
/// posterior `P(y = 1 | x_S)` is increasing in `t` and crosses 1/2 at `t = 0`,
/// so the accuracy is `E_t[max(P(t), 1 - P(t))]`, evaluated by quadrature.
pub fn bayes_accuracy_subset(spec: &SyntheticSpec, subset: &[usize]) -> f64 {
    let w = spec.true_weights();
    let active: Vec<usize> = (0..spec.n).filter(|&j| w[j] != 0.0).collect();
    let total_var: f64 = active
        .iter()
        .flat_map(|&a| active.iter().map(move |&b| (a, b)))
        .map(|(a, b)| w[a] * w[b] * spec.covariance(a, b))
        .sum();

    // Only subset features correlated with the true support matter.
    let relevant: Vec<usize> = subset
        .iter()
        .copied()
        .filter(|&s| active.iter().any(|&a| spec.covariance(s, a) != 0.0))
        .collect();
    let explained_var = if relevant.is_empty() {
        0.0
    } else {
        let k = relevant.len();
        let sigma_ss = DMatrix::from_fn(k, k, |r, c| spec.covariance(relevant[r], relevant[c]));
        let cross = DVector::from_fn(k, |r, _| {
            active.iter().map(|&a| w[a] * spec.covariance(relevant[r], a)).sum()
        });
        let solved = sigma_ss
            .cholesky()
            .expect("block covariance is positive definite")
            .solve(&cross);
        cross.dot(&solved)
    };
    let residual_var = (total_var - explained_var).max(0.0);
    let mean = spec.intercept;
    let sd = explained_var.sqrt();

    let posterior = |t: f64| -> f64 {
        match spec.noise {
            NoiseModel::Logistic => expected_sigmoid(t, residual_var.sqrt()),
            NoiseModel::Margin { flip_probability: eps } => {
                let p = if residual_var <= 0.0 {
                    if t >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    standard_normal_cdf(t / residual_var.sqrt())
                };
                eps + (1.0 - 2.0 * eps) * p
            }
        }
    };
    let correct = |t: f64| {
        let p = posterior(t);
        p.max(1.0 - p)
    };
    if sd == 0.0 {
        return correct(mean);
    }
    // The integrand has a kink at t = 0; integrate each side separately.
    let density = |t: f64| (-(t - mean).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let lo = mean - 12.0 * sd;
    let hi = mean + 12.0 * sd;
    let f = |t: f64| correct(t) * density(t);
    if lo < 0.0 && hi > 0.0 {
        simpson(f, lo, 0.0, 2000) + simpson(f, 0.0, hi, 2000)
    } else {
        simpson(f, lo, hi, 4000)
    }
}

/// `E[σ(t + e)]` for `e ~ N(0, sd²)`.
fn expected_sigmoid(t: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return crate::objectives::sigmoid(t);
    }
    let density = |e: f64| (-(e * e) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    simpson(|e| crate::objectives::sigmoid(t + e) * density(e), -12.0 * sd, 12.0 * sd, 400)
}

fn standard_normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Composite Simpson rule with `intervals` (even) subintervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}
