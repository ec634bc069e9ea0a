//! Minimizers for the four objectives and the fitted [`LinearModel`].
//!
//! Logistic objectives are minimized by accelerated proximal gradient
//! descent with a backtracking line search and function-value restarts, so
//! the iterates descend monotonically. For the plain objective the proximal
//! step is the identity. The L1 hinge objective is a linear program and is
//! solved exactly by a primal simplex, as is the plain hinge objective on
//! data that are not separable. On separable data the plain hinge optimum is
//! not unique, and the fit runs the same descent on a Huberized surrogate
//! from the starting point, keeping the implicit bias of gradient descent;
//! its reported objective is the exact hinge.
//!
//! Every fit records a first-order optimality certificate. With `g` the
//! gradient of the smooth part (for hinge, the subgradient
//! `-Σ aᵢỹᵢxᵢ` given sample multipliers `aᵢ ∈ ∂max(0, 1 - tᵢ)`), an L1
//! optimum satisfies `|g_j + λ sign(β_j)| ≤ tol` on the support,
//! `|g_j| ≤ λ + tol` off it, and `|g_0| ≤ tol` for the unpenalized intercept.

use std::io::{Read, Write};
use std::path::Path;

use log::{debug, warn};
use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod lp;

use crate::dataset::{self, Dataset, DatasetError, StandardizationParams};
use crate::objectives::{
    self, hinge_loss_from_scores, labels_as_f64, logistic_gradient_from_scores,
    logistic_loss_from_scores, score_rows, signed_labels, sigmoid,
    smoothed_hinge_from_scores, smoothed_hinge_gradient_from_scores, soft_threshold,
    ObjectiveError, ObjectiveKind, ObjectiveSpec, WeightVector,
};

/// Tolerance of the optimality certificate asserted on L1 fits.
pub const KKT_TOLERANCE: f64 = 1e-4;

const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("model features not found in dataset: {0:?}")]
    FeatureMismatch(Vec<String>),
    #[error("initial weights have {found} entries, dataset has {expected} features")]
    InitialWeights { expected: usize, found: usize },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("model document: {0}")]
    Serialization(#[from] serde_json::Error),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SolverError>;

/// Backtracking parameters. A trial step `t` from the extrapolated point `z`
/// is accepted when the smooth part satisfies
/// `f(z⁺) ≤ f(z) + ∇f(z)ᵀ(z⁺ - z) + ‖z⁺ - z‖²/(2t)`; otherwise
/// `t ← shrink·t`. Each iteration starts from the previous accepted step
/// divided by `shrink`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRule {
    pub initial_step: f64,
    pub shrink: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Gradient iterations for logistic fits, simplex pivots for hinge fits.
    pub max_iterations: usize,
    /// Relative objective decrease below which a logistic fit may stop.
    pub tolerance: f64,
    /// A logistic fit stops only once the optimality residual is also below this.
    pub stationarity_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_weights: Option<WeightVector>,
    pub step_rule: StepRule,
    /// Huber width of the surrogate minimized for the plain hinge objective.
    pub hinge_smoothing: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-7,
            stationarity_tolerance: 1e-6,
            initial_weights: None,
            step_rule: StepRule::default(),
            hinge_smoothing: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SolverError::Config(msg.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.tolerance > 0.0) || !(self.stationarity_tolerance > 0.0) {
            return bad("tolerances must be positive");
        }
        let s = &self.step_rule;
        if !(s.initial_step > 0.0) || !(s.shrink > 0.0 && s.shrink < 1.0) {
            return bad("step rule needs initial_step > 0 and shrink in (0, 1)");
        }
        if !(self.hinge_smoothing > 0.0) {
            return bad("hinge_smoothing must be positive");
        }
        Ok(())
    }

    pub fn with_initial_weights(mut self, w: WeightVector) -> Self {
        self.initial_weights = Some(w);
        self
    }
}

#[derive(Clone, Copy, Debug)]
enum SmoothPart {
    Logistic,
    Hinge { delta: f64 },
}

struct Problem<'a> {
    x: ArrayView2<'a, f64>,
    /// 0/1 labels for logistic, ±1 for hinge.
    y: Vec<f64>,
    part: SmoothPart,
    lambda: f64,
}

impl Problem<'_> {
    fn smooth_value(&self, scores: &Array1<f64>) -> f64 {
        match self.part {
            SmoothPart::Logistic => logistic_loss_from_scores(scores, &self.y),
            SmoothPart::Hinge { delta } => smoothed_hinge_from_scores(scores, &self.y, delta),
        }
    }

    fn smooth_gradient(&self, scores: &Array1<f64>) -> WeightVector {
        match self.part {
            SmoothPart::Logistic => logistic_gradient_from_scores(self.x, scores, &self.y),
            SmoothPart::Hinge { delta } => {
                smoothed_hinge_gradient_from_scores(self.x, scores, &self.y, delta)
            }
        }
    }

    fn value(&self, w: &WeightVector, scores: &Array1<f64>) -> f64 {
        self.smooth_value(scores) + self.lambda * w.l1_norm()
    }
}

/// Largest violation of the first-order conditions at `w` given the smooth
/// gradient `g`.
pub fn stationarity_residual(w: &WeightVector, g: &WeightVector, lambda: f64) -> f64 {
    let mut worst = g.intercept.abs();
    for (&b, &gj) in w.weights.iter().zip(g.weights.iter()) {
        let v = if b != 0.0 {
            (gj + lambda * b.signum()).abs()
        } else {
            (gj.abs() - lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

struct DescentOutcome {
    weights: WeightVector,
    iterations: usize,
    converged: bool,
    residual: f64,
    objective: f64,
}

fn proximal_descent(problem: &Problem, start: WeightVector, cfg: &SolverConfig) -> DescentOutcome {
    let rule = &cfg.step_rule;
    let lambda = problem.lambda;
    let mut w = start;
    let mut s = score_rows(&w, problem.x);
    let mut f = problem.value(&w, &s);
    let mut g = problem.smooth_gradient(&s);
    let mut residual = stationarity_residual(&w, &g, lambda);
    // Extrapolated point and its smooth value/gradient.
    let mut z = w.clone();
    let mut zs = s.clone();
    let mut zf = problem.smooth_value(&zs);
    let mut zg = g.clone();
    let mut theta = 1.0f64;
    let mut step = rule.initial_step;
    let mut rel_decrease = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        if residual <= cfg.stationarity_tolerance && rel_decrease <= cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        while step >= MIN_STEP {
            let cand = WeightVector {
                intercept: z.intercept - step * zg.intercept,
                weights: z
                    .weights
                    .iter()
                    .zip(zg.weights.iter())
                    .map(|(&b, &gj)| soft_threshold(b - step * gj, step * lambda))
                    .collect(),
            };
            let d0 = cand.intercept - z.intercept;
            let mut lin = zg.intercept * d0;
            let mut sq = d0 * d0;
            for ((a, b), gj) in cand.weights.iter().zip(z.weights.iter()).zip(zg.weights.iter()) {
                lin += gj * (a - b);
                sq += (a - b) * (a - b);
            }
            let cs = score_rows(&cand, problem.x);
            let smooth = problem.smooth_value(&cs);
            if smooth <= zf + lin + sq / (2.0 * step) {
                accepted = Some((cand, cs, smooth));
                break;
            }
            step *= rule.shrink;
        }
        let Some((cand, cs, smooth)) = accepted else {
            // No step above the floor satisfies the bound: numerically stationary.
            converged = residual <= cfg.stationarity_tolerance;
            break;
        };
        let cf = smooth + lambda * cand.weights.iter().map(|v| v.abs()).sum::<f64>();
        if cf > f {
            if theta == 1.0 {
                // A plain step from the iterate failed to descend: round-off floor.
                converged = residual <= cfg.stationarity_tolerance;
                break;
            }
            // Momentum overshot: restart from the current iterate.
            theta = 1.0;
            z = w.clone();
            zs = s.clone();
            zf = problem.smooth_value(&zs);
            zg = g.clone();
            continue;
        }
        debug_assert!(cf <= f);
        rel_decrease = (f - cf) / f.abs().max(f64::MIN_POSITIVE);
        let next_theta = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / next_theta;
        theta = next_theta;
        let ng = problem.smooth_gradient(&cs);
        z = WeightVector {
            intercept: cand.intercept + beta * (cand.intercept - w.intercept),
            weights: cand
                .weights
                .iter()
                .zip(w.weights.iter())
                .map(|(&a, &b)| a + beta * (a - b))
                .collect(),
        };
        w = cand;
        s = cs;
        f = cf;
        g = ng;
        residual = stationarity_residual(&w, &g, lambda);
        if beta == 0.0 {
            zs = s.clone();
            zg = g.clone();
        } else {
            zs = score_rows(&z, problem.x);
            zg = problem.smooth_gradient(&zs);
        }
        zf = problem.smooth_value(&zs);
        step = (step / rule.shrink).min(MAX_STEP);
    }
    if !converged && residual <= cfg.stationarity_tolerance && rel_decrease <= cfg.tolerance {
        converged = true;
    }
    DescentOutcome {
        weights: w,
        iterations,
        converged,
        residual,
        objective: f,
    }
}

/// Result of minimizing an objective on data used as given (no scaling).
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub weights: WeightVector,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Gradient residual for logistic fits and for plain hinge fits on
    /// separable data (of the surrogate); exact subgradient residual for
    /// other hinge fits.
    pub kkt_violation: f64,
    /// Per-sample multipliers certifying an exact hinge fit.
    pub multipliers: Option<Vec<f64>>,
}

impl Solution {
    /// Whether the optimality certificate holds at [`KKT_TOLERANCE`].
    pub fn certified(&self) -> bool {
        self.kkt_violation <= KKT_TOLERANCE
    }
}

/// Minimizes `obj` over the rows of `d` exactly as they are.
pub fn minimize(d: &Dataset, obj: &ObjectiveSpec, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    d.require_both_classes()?;
    let n = d.n_features();
    let start = match &cfg.initial_weights {
        Some(w) if w.len() != n => {
            return Err(SolverError::InitialWeights {
                expected: n,
                found: w.len(),
            })
        }
        Some(w) => w.clone(),
        None => WeightVector::zeros(n),
    };
    let x = d.features().view();
    let lambda = obj.lambda();
    if obj.kind().is_logistic() {
        let problem = Problem {
            x,
            y: labels_as_f64(d),
            part: SmoothPart::Logistic,
            lambda,
        };
        let out = proximal_descent(&problem, start, cfg);
        return Ok(Solution {
            objective: out.objective,
            weights: out.weights,
            iterations: out.iterations,
            converged: out.converged,
            kkt_violation: out.residual,
            multipliers: None,
        });
    }
    let y = signed_labels(d);
    let exact = |w: &WeightVector| hinge_loss_from_scores(&score_rows(w, x), &y) + lambda * w.l1_norm();
    if !obj.kind().is_l1() {
        // Exact when the data are not separable. On separable data every
        // zero-loss direction is optimal and the simplex vertex is arbitrary,
        // so the smoothed descent picks the solution instead.
        let out = lp::solve_hinge(x, &y, 0.0, None, cfg.max_iterations);
        let objective = exact(&out.weights);
        if out.optimal && objective > SEPARABLE_LOSS {
            let residual = hinge_residual(x, &y, 0.0, &out.weights, &out.multipliers);
            return Ok(Solution {
                objective,
                weights: out.weights,
                iterations: out.pivots,
                converged: true,
                kkt_violation: residual,
                multipliers: Some(out.multipliers),
            });
        }
        let problem = Problem {
            x,
            y: y.clone(),
            part: SmoothPart::Hinge { delta: cfg.hinge_smoothing },
            lambda: 0.0,
        };
        let out = proximal_descent(&problem, start, cfg);
        return Ok(Solution {
            objective: exact(&out.weights),
            weights: out.weights,
            iterations: out.iterations,
            converged: out.converged,
            kkt_violation: out.residual,
            multipliers: None,
        });
    }
    let out = lp::solve_hinge(x, &y, lambda, cfg.initial_weights.as_ref(), cfg.max_iterations);
    debug!("hinge simplex: {} pivots, optimal {}", out.pivots, out.optimal);
    let residual = hinge_residual(x, &y, lambda, &out.weights, &out.multipliers);
    Ok(Solution {
        objective: exact(&out.weights),
        weights: out.weights,
        iterations: out.pivots,
        converged: out.optimal,
        kkt_violation: residual,
        multipliers: Some(out.multipliers),
    })
}

/// Hinge loss at or below which the data count as separable.
const SEPARABLE_LOSS: f64 = 1e-9;

/// Margins within this distance of 1 may carry any multiplier in `[0, 1]`.
const MARGIN_TOL: f64 = 1e-9;

/// Exact subgradient residual of the hinge objective at `w` with sample
/// multipliers `a`, including the complementarity of `a` with the margins.
fn hinge_residual(x: ArrayView2<f64>, y: &[f64], lambda: f64, w: &WeightVector, a: &[f64]) -> f64 {
    let scores = score_rows(w, x);
    let mut worst = 0.0f64;
    for ((&s, &yi), &ai) in scores.iter().zip(y).zip(a) {
        let t = yi * s;
        let required = if t < 1.0 - MARGIN_TOL {
            1.0
        } else if t > 1.0 + MARGIN_TOL {
            0.0
        } else {
            ai.clamp(0.0, 1.0)
        };
        worst = worst.max((ai - required).abs());
    }
    let coef: Array1<f64> = a.iter().zip(y).map(|(ai, yi)| -ai * yi).collect();
    let g = WeightVector {
        intercept: coef.sum(),
        weights: x.t().dot(&coef),
    };
    worst.max(stationarity_residual(w, &g, lambda))
}

/// Optimality residual of `w` for `obj` on `d`. Hinge kinds need per-sample
/// multipliers `aᵢ ∈ [0, 1]`.
pub fn kkt_violation(
    d: &Dataset,
    obj: &ObjectiveSpec,
    w: &WeightVector,
    multipliers: Option<&[f64]>,
) -> Result<f64> {
    let s = objectives::scores(w, d)?;
    let x = d.features().view();
    if obj.kind().is_logistic() {
        let g = logistic_gradient_from_scores(x, &s, &labels_as_f64(d));
        return Ok(stationarity_residual(w, &g, obj.lambda()));
    }
    let a = multipliers.ok_or_else(|| SolverError::Config("hinge certificate needs sample multipliers".into()))?;
    if a.len() != d.n_samples() {
        return Err(SolverError::Config(format!(
            "{} multipliers for {} samples",
            a.len(),
            d.n_samples()
        )));
    }
    Ok(hinge_residual(x, &signed_labels(d), obj.lambda(), w, a))
}

/// Smallest λ at which the L1 logistic optimum has all weights zero:
/// `max_j |(1/M) Σ_i x_ij (y_i - ȳ)|`.
pub fn lambda_max(d: &Dataset) -> Result<f64> {
    d.require_both_classes()?;
    let m = d.n_samples() as f64;
    let ybar = d.positive_rate();
    let centered: Array1<f64> = d.labels().iter().map(|&y| y as f64 - ybar).collect();
    let corr = d.features().t().dot(&centered) / m;
    Ok(corr.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "SVM")]
    Svm,
}

impl From<ObjectiveKind> for ModelKind {
    fn from(k: ObjectiveKind) -> Self {
        if k.is_logistic() {
            ModelKind::Lr
        } else {
            ModelKind::Svm
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    pub kkt_violation: f64,
    /// Accuracy of the fitted model on its own (raw) training data.
    pub training_accuracy: f64,
    /// Training columns that were constant, so their scale was set to 1.
    pub constant_columns: Vec<String>,
}

/// A fitted classifier: weights live in standardized feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: ModelKind,
    pub objective: ObjectiveKind,
    pub lambda: f64,
    pub feature_names: Vec<String>,
    pub standardization: StandardizationParams,
    pub weights: WeightVector,
    pub diagnostics: FitDiagnostics,
}

const MODEL_FORMAT: &str = "sparsebench-model/1";

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    #[serde(flatten)]
    model: LinearModel,
}

impl LinearModel {
    pub fn certified(&self) -> bool {
        self.diagnostics.kkt_violation <= KKT_TOLERANCE
    }

    pub fn nonzero_count(&self) -> usize {
        self.weights.nonzero_count()
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.to_string(),
            model: self.clone(),
        };
        serde_json::to_writer_pretty(out, &doc)?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_reader(input)?;
        if doc.format != MODEL_FORMAT {
            return Err(SolverError::Config(format!(
                "unsupported model format `{}`",
                doc.format
            )));
        }
        Ok(doc.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Standardizes `d` with its own statistics, minimizes `obj` and packages
/// the result. `d` holds raw features.
pub fn fit(d: &Dataset, obj: &ObjectiveSpec, cfg: &SolverConfig) -> Result<LinearModel> {
    let params = dataset::fit_standardizer(d)?;
    let z = dataset::apply_standardizer(d, &params)?;
    let sol = minimize(&z, obj, cfg)?;
    let constant_columns = params
        .constant_columns
        .iter()
        .zip(d.feature_names())
        .filter(|(c, _)| **c)
        .map(|(_, name)| name.clone())
        .collect();
    let mut model = LinearModel {
        kind: obj.kind().into(),
        objective: obj.kind(),
        lambda: obj.lambda(),
        feature_names: d.feature_names().to_vec(),
        standardization: params,
        weights: sol.weights,
        diagnostics: FitDiagnostics {
            iterations: sol.iterations,
            objective: sol.objective,
            converged: sol.converged,
            kkt_violation: sol.kkt_violation,
            training_accuracy: 0.0,
            constant_columns,
        },
    };
    if obj.kind().is_l1() && !model.certified() {
        warn!(
            "{:?} fit at lambda {} is not certified: residual {:e} after {} iterations",
            obj.kind(),
            obj.lambda(),
            sol.kkt_violation,
            sol.iterations
        );
    }
    let predicted = predict_standardized(&model, &z);
    model.diagnostics.training_accuracy = accuracy(&predicted, d.labels());
    Ok(model)
}

fn accuracy(predicted: &[u8], labels: &[u8]) -> f64 {
    let hits = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

/// Raw features of `d` in the model's column order.
fn aligned_features(m: &LinearModel, d: &Dataset) -> Result<Dataset> {
    if d.feature_names() == m.feature_names.as_slice() {
        return Ok(d.clone());
    }
    match d.resolve_features(&m.feature_names) {
        Ok(cols) => Ok(d.select_columns(&cols)),
        Err(_) => {
            let missing = m
                .feature_names
                .iter()
                .filter(|f| d.feature_index(f).is_none())
                .cloned()
                .collect();
            Err(SolverError::FeatureMismatch(missing))
        }
    }
}

/// `β₀ + βᵀx̃` with `x̃` the model's standardization of the raw rows of `d`.
/// Columns are matched by name.
pub fn decision_values(m: &LinearModel, d: &Dataset) -> Result<Array1<f64>> {
    let raw = aligned_features(m, d)?;
    let z = dataset::apply_standardizer(&raw, &m.standardization)?;
    Ok(score_rows(&m.weights, z.features().view()))
}

/// Positive-class probabilities; `None` for SVM models.
pub fn probabilities(m: &LinearModel, d: &Dataset) -> Result<Option<Array1<f64>>> {
    if m.kind != ModelKind::Lr {
        return Ok(None);
    }
    Ok(Some(decision_values(m, d)?.mapv(sigmoid)))
}

/// Class 1 iff the decision value is `≥ 0` (for LR, iff probability `≥ 0.5`).
pub fn predict(m: &LinearModel, d: &Dataset) -> Result<Vec<u8>> {
    Ok(labels_from_decisions(&decision_values(m, d)?))
}

pub fn labels_from_decisions(decisions: &Array1<f64>) -> Vec<u8> {
    decisions.iter().map(|&v| u8::from(v >= 0.0)).collect()
}

fn predict_standardized(m: &LinearModel, z: &Dataset) -> Vec<u8> {
    labels_from_decisions(&score_rows(&m.weights, z.features().view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use ndarray::{array, Array2};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn random_standardized(seed: u64, m: usize, n: usize) -> Dataset {
        let mut r = SeededRng::new(seed);
        let x = Array2::from_shape_fn((m, n), |_| r.normal());
        let truth: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let labels = x
            .outer_iter()
            .map(|row| {
                let s: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
                r.bernoulli(sigmoid(s)) as u8
            })
            .collect::<Vec<_>>();
        let d = Dataset::from_matrix(x, labels).unwrap();
        let p = dataset::fit_standardizer(&d).unwrap();
        dataset::apply_standardizer(&d, &p).unwrap()
    }

    fn separable_1d() -> Dataset {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..10 {
            x.push(-1.0);
            y.push(0);
            x.push(1.0);
            y.push(1);
        }
        Dataset::from_matrix(Array2::from_shape_vec((20, 1), x).unwrap(), y).unwrap()
    }

    #[test]
    fn separable_with_penalty_stays_finite() {
        // λ = 0.5 is exactly the null-model threshold of this data, so a
        // smaller penalty is needed for a nonzero slope.
        let d = separable_1d();
        let lmax = lambda_max(&dataset::apply_standardizer(&d, &dataset::fit_standardizer(&d).unwrap()).unwrap()).unwrap();
        assert!(lmax < 0.5);
        let m = fit(&d, &ObjectiveSpec::l1(ObjectiveKind::LogisticL1, 0.1).unwrap(), &cfg()).unwrap();
        assert!(m.weights.is_finite());
        assert!(m.weights.weights[0] > 0.0);
        assert_eq!(m.diagnostics.training_accuracy, 1.0);
        assert!(m.diagnostics.converged);
        assert!(m.certified());
        let null = fit(&d, &ObjectiveSpec::l1(ObjectiveKind::LogisticL1, 0.5).unwrap(), &cfg()).unwrap();
        assert_eq!(null.nonzero_count(), 0);
    }

    #[test]
    fn null_model_above_lambda_max() {
        let d = random_standardized(10, 40, 5);
        let lmax = lambda_max(&d).unwrap();
        let sol = minimize(&d, &ObjectiveSpec::l1(ObjectiveKind::LogisticL1, 1.001 * lmax).unwrap(), &cfg()).unwrap();
        assert_eq!(sol.weights.nonzero_count(), 0);
        let ybar = d.positive_rate();
        assert!((sol.weights.intercept - (ybar / (1.0 - ybar)).ln()).abs() < 1e-5);
        let sol = minimize(&d, &ObjectiveSpec::l1(ObjectiveKind::LogisticL1, 0.9 * lmax).unwrap(), &cfg()).unwrap();
        assert!(sol.weights.nonzero_count() >= 1);
        assert!(sol.certified());
    }

    #[test]
    fn lambda_max_edge_cases() {
        let zeros = Dataset::from_matrix(Array2::zeros((6, 3)), vec![0, 1, 0, 1, 1, 0]).unwrap();
        assert_eq!(lambda_max(&zeros).unwrap(), 0.0);
        let d = random_standardized(11, 20, 4);
        let rows: Vec<usize> = (0..20).chain(0..20).collect();
        let doubled = d.select_rows(&rows);
        let doubled = Dataset::from_matrix(doubled.features().clone(), doubled.labels().to_vec()).unwrap();
        assert!((lambda_max(&d).unwrap() - lambda_max(&doubled).unwrap()).abs() < 1e-15);
        let single = Dataset::from_matrix(Array2::zeros((3, 1)), vec![1, 1, 1]).unwrap();
        assert!(lambda_max(&single).is_err());
    }

    #[test]
    fn single_class_is_an_error() {
        let d = Dataset::from_matrix(array![[1.0], [2.0], [3.0]], vec![0, 0, 0]).unwrap();
        assert!(matches!(
            fit(&d, &ObjectiveSpec::plain(ObjectiveKind::LogisticPlain), &cfg()),
            Err(SolverError::Dataset(DatasetError::SingleClass))
        ));
    }

    #[test]
    fn plain_logistic_reaches_stationarity() {
        let d = random_standardized(12, 80, 4);
        let sol = minimize(&d, &ObjectiveSpec::plain(ObjectiveKind::LogisticPlain), &cfg()).unwrap();
        assert!(sol.converged);
        assert!(sol.kkt_violation <= 1e-6);
    }

    #[test]
    fn hinge_fits_certify() {
        let d = random_standardized(13, 60, 5);
        for obj in [
            ObjectiveSpec::plain(ObjectiveKind::HingePlain),
            ObjectiveSpec::l1(ObjectiveKind::HingeL1, 0.5).unwrap(),
            ObjectiveSpec::l1(ObjectiveKind::HingeL1, 5.0).unwrap(),
        ] {
            let sol = minimize(&d, &obj, &cfg()).unwrap();
            assert!(sol.converged, "{obj:?} {sol:?}");
            assert!(sol.certified(), "{obj:?} {sol:?}");
            let exact = objectives::hinge_cost(&sol.weights, &d, obj.lambda()).unwrap();
            assert_eq!(exact, sol.objective);
        }
    }

    #[test]
    fn unpenalized_fit_on_separable_data_terminates() {
        let d = separable_1d();
        let m = fit(&d, &ObjectiveSpec::plain(ObjectiveKind::LogisticPlain), &cfg()).unwrap();
        assert!(m.weights.is_finite());
        assert_eq!(m.diagnostics.training_accuracy, 1.0);
        let small = SolverConfig { max_iterations: 5, ..cfg() };
        let m = fit(&d, &ObjectiveSpec::plain(ObjectiveKind::LogisticPlain), &small).unwrap();
        assert!(!m.diagnostics.converged);
        assert_eq!(m.diagnostics.iterations, 5);
    }

    #[test]
    fn deterministic_and_permutation_invariant() {
        let d = random_standardized(14, 50, 4);
        let obj = ObjectiveSpec::l1(ObjectiveKind::LogisticL1, 0.02).unwrap();
        let a = minimize(&d, &obj, &cfg()).unwrap();
        let b = minimize(&d, &obj, &cfg()).unwrap();
        assert_eq!(a, b);

        let mut rows: Vec<usize> = (0..50).collect();
        SeededRng::new(1).shuffle(&mut rows);
        let shuffled = d.select_rows(&rows);
        let c = minimize(&shuffled, &obj, &cfg()).unwrap();
        assert!((a.objective - c.objective).abs() < 1e-9);
        for (x, y) in a.weights.weights.iter().zip(c.weights.weights.iter()) {
            assert!((x - y).abs() < 1e-4);
        }

        let cols = [2usize, 0, 3, 1];
        let permuted = d.select_columns(&cols);
        let e = minimize(&permuted, &obj, &cfg()).unwrap();
        for (k, &j) in cols.iter().enumerate() {
            assert!((e.weights.weights[k] - a.weights.weights[j]).abs() < 1e-4);
        }
    }

    #[test]
    fn warm_start_dimension_checked() {
        let d = random_standardized(15, 30, 3);
        let bad = cfg().with_initial_weights(WeightVector::zeros(2));
        assert!(matches!(
            minimize(&d, &ObjectiveSpec::plain(ObjectiveKind::LogisticPlain), &bad),
            Err(SolverError::InitialWeights { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { max_iterations: 0, ..cfg() }.validate().is_err());
        assert!(SolverConfig { tolerance: 0.0, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    fn trained_model(kind: ObjectiveKind) -> (LinearModel, Dataset) {
        let mut r = SeededRng::new(16);
        let x = Array2::from_shape_fn((40, 3), |(_, j)| r.normal() * (j + 1) as f64 * 10.0 + 5.0);
        let labels = x.outer_iter().map(|row| u8::from(row[0] - row[2] * 0.2 > 4.0)).collect();
        let d = Dataset::from_matrix(x, labels).unwrap();
        let obj = if kind.is_l1() { ObjectiveSpec::new(kind, 0.01).unwrap() } else { ObjectiveSpec::plain(kind) };
        (fit(&d, &obj, &cfg()).unwrap(), d)
    }

    #[test]
    fn zero_model_predicts_positive_by_tie_rule() {
        let (mut m, d) = trained_model(ObjectiveKind::HingeL1);
        m.weights = WeightVector::zeros(3);
        assert!(decision_values(&m, &d).unwrap().iter().all(|&v| v == 0.0));
        assert!(predict(&m, &d).unwrap().iter().all(|&y| y == 1));
    }

    #[test]
    fn lr_prediction_rule_consistent() {
        let (m, d) = trained_model(ObjectiveKind::LogisticL1);
        let dec = decision_values(&m, &d).unwrap();
        let prob = probabilities(&m, &d).unwrap().unwrap();
        let pred = predict(&m, &d).unwrap();
        for i in 0..d.n_samples() {
            assert_eq!(pred[i] == 1, dec[i] >= 0.0);
            assert_eq!(pred[i] == 1, prob[i] >= 0.5);
        }
        let acc = accuracy(&pred, d.labels());
        assert_eq!(acc, m.diagnostics.training_accuracy);
        let (svm, _) = trained_model(ObjectiveKind::HingePlain);
        assert!(probabilities(&svm, &d).unwrap().is_none());
    }

    #[test]
    fn prediction_matches_columns_by_name() {
        let (m, d) = trained_model(ObjectiveKind::LogisticPlain);
        let reordered = d.select_columns(&[2, 0, 1]);
        assert_eq!(decision_values(&m, &d).unwrap(), decision_values(&m, &reordered).unwrap());
        let missing = d.select_columns(&[0, 1]);
        match decision_values(&m, &missing) {
            Err(SolverError::FeatureMismatch(names)) => assert_eq!(names, ["f2"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn model_document_round_trips_bit_exactly() {
        for kind in [ObjectiveKind::LogisticL1, ObjectiveKind::HingePlain] {
            let (m, _) = trained_model(kind);
            let text = m.to_text();
            let back = LinearModel::read_from(text.as_bytes()).unwrap();
            assert_eq!(back, m);
            for (a, b) in back.weights.weights.iter().zip(m.weights.weights.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        assert!(LinearModel::read_from(&b"{\"format\":\"other\"}"[..]).is_err());
    }
}
