//! Loss functions and gradients for the four linear classifiers.
//!
//! The logistic loss is a mean over samples, the hinge loss a plain sum, so a
//! given λ means different things for the two families. The intercept is
//! never penalized. Hinge labels are mapped `0 -> -1`, `1 -> +1`.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("dimension mismatch: weights have {expected} entries, data has {found} features")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("{kind:?} requires {requirement}")]
    LambdaKindMismatch {
        kind: ObjectiveKind,
        requirement: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, ObjectiveError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveKind {
    LogisticPlain,
    LogisticL1,
    HingePlain,
    HingeL1,
}

impl ObjectiveKind {
    pub fn is_l1(self) -> bool {
        matches!(self, Self::LogisticL1 | Self::HingeL1)
    }

    pub fn is_logistic(self) -> bool {
        matches!(self, Self::LogisticPlain | Self::LogisticL1)
    }

    /// The unpenalized kind of the same loss family.
    pub fn plain(self) -> Self {
        if self.is_logistic() {
            Self::LogisticPlain
        } else {
            Self::HingePlain
        }
    }

    pub fn penalized(self) -> Self {
        if self.is_logistic() {
            Self::LogisticL1
        } else {
            Self::HingeL1
        }
    }
}

/// Loss family plus penalty strength. λ is zero exactly for plain kinds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    kind: ObjectiveKind,
    lambda: f64,
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(ObjectiveError::InvalidLambda(lambda));
        }
        if kind.is_l1() && lambda == 0.0 {
            return Err(ObjectiveError::LambdaKindMismatch {
                kind,
                requirement: "a positive lambda",
            });
        }
        if !kind.is_l1() && lambda != 0.0 {
            return Err(ObjectiveError::LambdaKindMismatch {
                kind,
                requirement: "lambda = 0",
            });
        }
        Ok(Self { kind, lambda })
    }

    pub fn plain(kind: ObjectiveKind) -> Self {
        Self {
            kind: kind.plain(),
            lambda: 0.0,
        }
    }

    pub fn l1(kind: ObjectiveKind, lambda: f64) -> Result<Self> {
        Self::new(kind.penalized(), lambda)
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Intercept and per-feature weights of a linear score `β₀ + βᵀx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub intercept: f64,
    #[serde(with = "array_as_vec")]
    pub weights: Array1<f64>,
}

mod array_as_vec {
    use ndarray::Array1;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(a: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(a.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
        Vec::<f64>::deserialize(d).map(Array1::from)
    }
}

impl WeightVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            intercept: 0.0,
            weights: Array1::zeros(n),
        }
    }

    pub fn new(intercept: f64, weights: Vec<f64>) -> Self {
        Self {
            intercept,
            weights: Array1::from(weights),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn nonzero_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .fold(self.intercept.abs(), |acc, w| acc.max(w.abs()))
    }

    fn check(&self, n_features: usize) -> Result<()> {
        if self.len() != n_features {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.len(),
                found: n_features,
            });
        }
        Ok(())
    }
}

/// Logistic function, evaluated without overflow for any finite score.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

pub fn decision_value(w: &WeightVector, x: ArrayView1<f64>) -> Result<f64> {
    w.check(x.len())?;
    Ok(w.intercept + w.weights.dot(&x))
}

/// Probability of the positive class for one feature row.
pub fn sigmoid_prob(w: &WeightVector, x: ArrayView1<f64>) -> Result<f64> {
    decision_value(w, x).map(sigmoid)
}

/// Scores `Xβ + β₀` for every row.
pub fn scores(w: &WeightVector, d: &Dataset) -> Result<Array1<f64>> {
    w.check(d.n_features())?;
    Ok(score_rows(w, d.features().view()))
}

pub(crate) fn score_rows(w: &WeightVector, x: ArrayView2<f64>) -> Array1<f64> {
    let mut s = x.dot(&w.weights);
    s += w.intercept;
    s
}

pub(crate) fn labels_as_f64(d: &Dataset) -> Vec<f64> {
    d.labels().iter().map(|&y| y as f64).collect()
}

/// `+1` for the positive class, `-1` for the negative class.
pub fn signed_labels(d: &Dataset) -> Vec<f64> {
    d.labels()
        .iter()
        .map(|&y| if y == 1 { 1.0 } else { -1.0 })
        .collect()
}

/// Mean cross-entropy of `scores` against 0/1 labels `y`.
pub(crate) fn logistic_loss_from_scores(scores: &Array1<f64>, y: &[f64]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| {
            let p = sigmoid(s).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            let q = sigmoid(-s).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            -yi * p.ln() - (1.0 - yi) * q.ln()
        })
        .sum();
    total / y.len() as f64
}

/// `(1/M) Xᵀ(h - y)` and `(1/M) Σ(h - y)`.
pub(crate) fn logistic_gradient_from_scores(
    x: ArrayView2<f64>,
    scores: &Array1<f64>,
    y: &[f64],
) -> WeightVector {
    let m = y.len() as f64;
    let residual: Array1<f64> = scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| sigmoid(s) - yi)
        .collect();
    WeightVector {
        intercept: residual.sum() / m,
        weights: x.t().dot(&residual) / m,
    }
}

/// Mean cross-entropy plus `λ‖β‖₁`.
pub fn logistic_cost(w: &WeightVector, d: &Dataset, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let s = scores(w, d)?;
    Ok(logistic_loss_from_scores(&s, &labels_as_f64(d)) + lambda * w.l1_norm())
}

/// Gradient of the unpenalized mean cross-entropy.
pub fn logistic_gradient(w: &WeightVector, d: &Dataset) -> Result<WeightVector> {
    let s = scores(w, d)?;
    Ok(logistic_gradient_from_scores(
        d.features().view(),
        &s,
        &labels_as_f64(d),
    ))
}

pub(crate) fn hinge_loss_from_scores(scores: &Array1<f64>, y_signed: &[f64]) -> f64 {
    scores
        .iter()
        .zip(y_signed)
        .map(|(&s, &y)| (1.0 - y * s).max(0.0))
        .sum()
}

/// Summed hinge loss over ±1 labels plus `λ‖β‖₁`.
pub fn hinge_cost(w: &WeightVector, d: &Dataset, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let s = scores(w, d)?;
    Ok(hinge_loss_from_scores(&s, &signed_labels(d)) + lambda * w.l1_norm())
}

/// Huberized hinge of a margin `t = ỹ·score`: zero above `1 + δ`, linear
/// `1 - t` below `1 - δ`, and `(1 + δ - t)² / 4δ` in between. It bounds the
/// hinge from above by at most `δ/4`.
pub fn smoothed_hinge(t: f64, delta: f64) -> f64 {
    if t >= 1.0 + delta {
        0.0
    } else if t <= 1.0 - delta {
        1.0 - t
    } else {
        let u = 1.0 + delta - t;
        u * u / (4.0 * delta)
    }
}

/// Derivative of [`smoothed_hinge`] with respect to the margin, in `[-1, 0]`.
pub fn smoothed_hinge_slope(t: f64, delta: f64) -> f64 {
    if t >= 1.0 + delta {
        0.0
    } else if t <= 1.0 - delta {
        -1.0
    } else {
        -(1.0 + delta - t) / (2.0 * delta)
    }
}

pub(crate) fn smoothed_hinge_from_scores(scores: &Array1<f64>, y_signed: &[f64], delta: f64) -> f64 {
    scores
        .iter()
        .zip(y_signed)
        .map(|(&s, &y)| smoothed_hinge(y * s, delta))
        .sum()
}

pub(crate) fn smoothed_hinge_gradient_from_scores(
    x: ArrayView2<f64>,
    scores: &Array1<f64>,
    y_signed: &[f64],
    delta: f64,
) -> WeightVector {
    let coef: Array1<f64> = scores
        .iter()
        .zip(y_signed)
        .map(|(&s, &y)| smoothed_hinge_slope(y * s, delta) * y)
        .collect();
    WeightVector {
        intercept: coef.sum(),
        weights: x.t().dot(&coef),
    }
}

/// Proximal operator of `t·|·|`: `sign(z)·max(|z| - t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(ObjectiveError::InvalidLambda(lambda));
    }
    Ok(())
}
