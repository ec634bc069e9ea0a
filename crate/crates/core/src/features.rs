//! Feature rankings from fitted L1 models and accuracy-versus-feature-count
//! curves.
//!
//! Weights live in standardized space, so magnitudes compare across
//! features. The canonical ranking orders by mean `|weight|` across models,
//! compared at 10 significant digits so that round-off cannot split a tie,
//! with ties going to the lower column index. The fraction of models
//! selecting each feature is reported alongside.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, ModalitySpec};
use crate::evaluation::{self, Classifier, CVPlan, EvalError, SplitPlan};
use crate::objectives::ObjectiveKind;
use crate::solvers::{LinearModel, SolverConfig};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no models to rank")]
    NoModels,
    #[error("model {index} has a different feature space from model 0")]
    MismatchedFeatures { index: usize },
    #[error("k_max = {k_max} but the ranking has {len} features")]
    KTooLarge { k_max: usize, len: usize },
    #[error("curves refit an unpenalized classifier (1 or 3), got {0}")]
    PenalizedCurveClassifier(Classifier),
    #[error("the lambda path needs an L1 classifier (2 or 4), got {0}")]
    PlainPathClassifier(Classifier),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("writing feature output: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    /// Column in the models' feature space.
    pub column: usize,
    pub mean_weight: f64,
    pub mean_abs_weight: f64,
    /// Fraction of models with a nonzero weight.
    pub selection_frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub entries: Vec<RankedFeature>,
    pub objective: ObjectiveKind,
    /// λ of each source model.
    pub lambdas: Vec<f64>,
    pub model_count: usize,
}

pub fn rank_features(models: &[LinearModel]) -> Result<FeatureRanking> {
    let first = models.first().ok_or(FeatureError::NoModels)?;
    if let Some(index) = models.iter().position(|m| m.feature_names != first.feature_names) {
        return Err(FeatureError::MismatchedFeatures { index });
    }
    let count = models.len() as f64;
    let mut entries: Vec<RankedFeature> = first
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let ws = models.iter().map(|m| m.weights.weights[j]);
            RankedFeature {
                name: name.clone(),
                column: j,
                mean_weight: ws.clone().sum::<f64>() / count,
                mean_abs_weight: ws.clone().map(f64::abs).sum::<f64>() / count,
                selection_frequency: ws.filter(|w| *w != 0.0).count() as f64 / count,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        tie_key(b.mean_abs_weight)
            .total_cmp(&tie_key(a.mean_abs_weight))
            .then(a.column.cmp(&b.column))
    });
    Ok(FeatureRanking {
        entries,
        objective: first.objective,
        lambdas: models.iter().map(|m| m.lambda).collect(),
        model_count: models.len(),
    })
}

fn tie_key(v: f64) -> f64 {
    format!("{v:.9e}").parse().expect("formatted float parses")
}

impl FeatureRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, k: usize) -> Vec<String> {
        self.entries.iter().take(k).map(|e| e.name.clone()).collect()
    }

    /// `rank,feature,mean_abs_weight,selection_frequency` for the first
    /// `limit` entries (all when `None`).
    pub fn write_csv<W: Write>(&self, mut out: W, limit: Option<usize>) -> Result<()> {
        writeln!(out, "rank,feature,mean_abs_weight,selection_frequency")?;
        for (r, e) in self.entries.iter().take(limit.unwrap_or(usize::MAX)).enumerate() {
            writeln!(out, "{},{},{},{}", r + 1, e.name, e.mean_abs_weight, e.selection_frequency)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub acc_mean: f64,
    pub acc_sd: f64,
    /// Final fits at this `k` that stopped on the iteration budget.
    #[serde(default)]
    pub nonconverged_fits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    pub classifier: Classifier,
    pub modality: String,
    pub points: Vec<CurvePoint>,
}

impl AccuracyCurve {
    pub fn peak(&self) -> Option<CurvePoint> {
        self.points
            .iter()
            .copied()
            .reduce(|best, p| if p.acc_mean > best.acc_mean { p } else { best })
    }

    pub fn at(&self, k: usize) -> Option<CurvePoint> {
        self.points.iter().copied().find(|p| p.k == k)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,acc_mean,acc_sd")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.k, p.acc_mean, p.acc_sd)?;
        }
        Ok(())
    }

    /// Two whitespace-separated columns, `k` and mean accuracy.
    pub fn write_gnuplot<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} {}: k acc_mean", self.modality, self.classifier)?;
        for p in &self.points {
            writeln!(out, "{} {}", p.k, p.acc_mean)?;
        }
        Ok(())
    }
}

/// For `k = 1..=k_max`, refits the unpenalized `classifier` on the top-`k`
/// ranked features through the repeated-holdout protocol.
pub fn accuracy_vs_k(
    d: &Dataset,
    modality: &str,
    ranking: &FeatureRanking,
    classifier: Classifier,
    split: &SplitPlan,
    cfg: &SolverConfig,
    k_max: usize,
) -> Result<AccuracyCurve> {
    if classifier.is_l1() {
        return Err(FeatureError::PenalizedCurveClassifier(classifier));
    }
    if k_max > ranking.len() {
        return Err(FeatureError::KTooLarge { k_max, len: ranking.len() });
    }
    let points = (1..=k_max)
        .into_par_iter()
        .map(|k| -> Result<CurvePoint> {
            let spec = ModalitySpec::new(format!("{modality}-top{k}"), ranking.top(k)).map_err(EvalError::from)?;
            let r = evaluation::run_protocol(d, &spec, classifier, split, &CVPlan::default(), cfg)?;
            Ok(CurvePoint {
                k,
                acc_mean: r.accuracy.mean,
                acc_sd: r.accuracy.sd,
                nonconverged_fits: r.nonconverged_fits,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AccuracyCurve {
        classifier,
        modality: modality.to_string(),
        points,
    })
}

/// Like [`accuracy_vs_k`], but repetition `r` keeps the top `k` of
/// `rankings[r]`. With each ranking taken from the L1 model fitted on
/// repetition `r`'s training part, no test row influences which features a
/// curve point uses. A ranking pooled over all repetitions has seen every
/// test row and inflates the curve.
pub fn accuracy_vs_k_per_repetition(
    d: &Dataset,
    modality: &str,
    rankings: &[FeatureRanking],
    classifier: Classifier,
    split: &SplitPlan,
    cfg: &SolverConfig,
    k_max: usize,
) -> Result<AccuracyCurve> {
    if classifier.is_l1() {
        return Err(FeatureError::PenalizedCurveClassifier(classifier));
    }
    let len = rankings.iter().map(FeatureRanking::len).min().ok_or(FeatureError::NoModels)?;
    if k_max > len {
        return Err(FeatureError::KTooLarge { k_max, len });
    }
    let points = (1..=k_max)
        .into_par_iter()
        .map(|k| -> Result<CurvePoint> {
            let specs = rankings
                .iter()
                .map(|r| ModalitySpec::new(format!("{modality}-top{k}"), r.top(k)))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(EvalError::from)?;
            let r = evaluation::run_protocol_per_repetition(d, &specs, classifier, split, &CVPlan::default(), cfg)?;
            Ok(CurvePoint {
                k,
                acc_mean: r.accuracy.mean,
                acc_sd: r.accuracy.sd,
                nonconverged_fits: r.nonconverged_fits,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AccuracyCurve {
        classifier,
        modality: modality.to_string(),
        points,
    })
}

/// One single-model ranking per model, in model order.
pub fn rank_each(models: &[LinearModel]) -> Result<Vec<FeatureRanking>> {
    models.iter().map(|m| rank_features(std::slice::from_ref(m))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub mean_nonzero: f64,
    pub acc_mean: f64,
    pub acc_sd: f64,
}

/// Secondary curve mode: the L1 classifier at each fixed λ, reporting the
/// mean number of selected features against accuracy.
pub fn lambda_path_curve(
    d: &Dataset,
    modality: &ModalitySpec,
    classifier: Classifier,
    lambdas: &[f64],
    split: &SplitPlan,
    cfg: &SolverConfig,
) -> Result<Vec<PathPoint>> {
    if !classifier.is_l1() {
        return Err(FeatureError::PlainPathClassifier(classifier));
    }
    lambdas
        .par_iter()
        .map(|&lambda| -> Result<PathPoint> {
            let run = evaluation::run_protocol_fixed_lambda(d, modality, classifier, split, lambda, cfg)?;
            Ok(PathPoint {
                lambda,
                mean_nonzero: run.report.mean_nonzero,
                acc_mean: run.report.accuracy.mean,
                acc_sd: run.report.accuracy.sd,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub nonzero_count: usize,
    pub nonzero_names: Vec<String>,
}

/// Features with a weight other than exactly 0.
pub fn sparsity_report(m: &LinearModel) -> SparsityReport {
    let nonzero_names: Vec<String> = m
        .feature_names
        .iter()
        .zip(m.weights.weights.iter())
        .filter(|(_, &w)| w != 0.0)
        .map(|(n, _)| n.clone())
        .collect();
    SparsityReport {
        nonzero_count: nonzero_names.len(),
        nonzero_names,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{ObjectiveSpec, WeightVector};
    use crate::solvers::fit;
    use crate::synthgen::{generate, NoiseModel, SyntheticSpec};
    use ndarray::Array2;
    use proptest::prelude::*;

    fn model_with(weights: Vec<f64>) -> LinearModel {
        let n = weights.len();
        let x = Array2::from_shape_fn((4, n), |(i, j)| ((i * 7 + j * 3) % 5) as f64);
        let names = (1..=n).map(|j| format!("f{j}")).collect();
        let ids = (0..4).map(|i| format!("s{i}")).collect();
        let d = Dataset::new(x, vec![0, 1, 0, 1], names, ids).unwrap();
        let mut m = fit(&d, &ObjectiveSpec::l1(ObjectiveKind::LogisticL1, 1.0).unwrap(), &SolverConfig::default()).unwrap();
        m.weights = WeightVector::new(0.0, weights);
        m
    }

    #[test]
    fn ranks_by_magnitude() {
        let r = rank_features(&[model_with(vec![0.5, -0.9, 0.0, 0.2])]).unwrap();
        assert_eq!(r.top(4), ["f2", "f1", "f4", "f3"]);
        assert_eq!(r.entries[3].selection_frequency, 0.0);
    }

    #[test]
    fn duplicate_models_rank_like_one() {
        let m = model_with(vec![0.1, -0.3, 0.3, 0.0, 2.0]);
        let one = rank_features(std::slice::from_ref(&m)).unwrap();
        let two = rank_features(&[m.clone(), m]).unwrap();
        assert_eq!(one.entries, two.entries);
        // tie between f2 and f3 goes to the lower column
        assert_eq!(one.top(3), ["f5", "f2", "f3"]);
    }

    #[test]
    fn ranking_errors() {
        assert!(matches!(rank_features(&[]), Err(FeatureError::NoModels)));
        let a = model_with(vec![1.0, 2.0]);
        let b = model_with(vec![1.0, 2.0, 3.0]);
        assert!(matches!(rank_features(&[a, b]), Err(FeatureError::MismatchedFeatures { index: 1 })));
    }

    #[test]
    fn sparsity_examples() {
        let zero = sparsity_report(&model_with(vec![0.0, 0.0]));
        assert_eq!((zero.nonzero_count, zero.nonzero_names.len()), (0, 0));
        let r = sparsity_report(&model_with(vec![0.1, 0.0, -3.0]));
        assert_eq!(r.nonzero_count, 2);
        assert_eq!(r.nonzero_names, ["f1", "f3"]);
    }

    proptest! {
        #[test]
        fn ranking_invariances(
            raw in proptest::collection::vec(proptest::collection::vec(-3i32..4, 5), 1..5),
            scale in 0.1f64..10.0,
            rot in 0usize..5,
        ) {
            let models: Vec<LinearModel> = raw
                .iter()
                .map(|ws| model_with(ws.iter().map(|&v| f64::from(v) * 0.5).collect()))
                .collect();
            let base = rank_features(&models).unwrap();
            let mut permuted = models.clone();
            let r = rot % permuted.len();
            permuted.rotate_left(r);
            prop_assert_eq!(rank_features(&permuted).unwrap().top(5), base.top(5));
            let scaled: Vec<LinearModel> = models
                .iter()
                .map(|m| {
                    let mut m = m.clone();
                    m.weights.weights.mapv_inplace(|w| w * scale);
                    m
                })
                .collect();
            prop_assert_eq!(rank_features(&scaled).unwrap().top(5), base.top(5));
            if models.len() == 1 {
                let trailing_zeros = base.entries.iter().rev().take_while(|e| e.mean_abs_weight == 0.0).count();
                prop_assert_eq!(sparsity_report(&models[0]).nonzero_count, base.len() - trailing_zeros);
            }
        }
    }

    #[test]
    fn curve_rejects_bad_arguments() {
        let spec = SyntheticSpec::new(40, 6, vec![(0, 2.0)], NoiseModel::Logistic, 1);
        let (d, _) = generate(&spec).unwrap();
        let m = fit(&d, &ObjectiveSpec::l1(ObjectiveKind::LogisticL1, 0.01).unwrap(), &SolverConfig::default()).unwrap();
        let r = rank_features(&[m]).unwrap();
        let split = SplitPlan::default();
        let cfg = SolverConfig::default();
        assert!(accuracy_vs_k(&d, "m", &r, Classifier::LrL1, &split, &cfg, 2).is_err());
        assert!(accuracy_vs_k(&d, "m", &r, Classifier::Lr, &split, &cfg, 7).is_err());
    }

    #[test]
    fn gnuplot_and_csv_output() {
        let c = AccuracyCurve {
            classifier: Classifier::Svm,
            modality: "cca".into(),
            points: vec![
                CurvePoint { k: 1, acc_mean: 0.5, acc_sd: 0.1, nonconverged_fits: 0 },
                CurvePoint { k: 2, acc_mean: 0.75, acc_sd: 0.0, nonconverged_fits: 0 },
            ],
        };
        let mut csv = Vec::new();
        c.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "k,acc_mean,acc_sd\n1,0.5,0.1\n2,0.75,0\n");
        let mut dat = Vec::new();
        c.write_gnuplot(&mut dat).unwrap();
        assert_eq!(String::from_utf8(dat).unwrap(), "# cca SVM: k acc_mean\n1 0.5\n2 0.75\n");
        assert_eq!(c.peak().unwrap().k, 2);
    }
}
