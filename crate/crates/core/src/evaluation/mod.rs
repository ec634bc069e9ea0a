//! Repeated stratified holdout with cross-validated penalty selection.
//!
//! Each repetition splits the data, picks λ by k-fold CV on the training part
//! (L1 classifiers only), fits on the training part and scores the held-out
//! part. The fitting code never sees a test row: the optional
//! [`FitObserver`] is told which sample ids enter every standardization and
//! fit, so tests can check that.

mod stats;

use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, Dataset, DatasetError, ModalitySpec};
use crate::objectives::{ObjectiveError, ObjectiveKind, ObjectiveSpec};
use crate::rng::{derive_seed, SeededRng};
use crate::solvers::{self, LinearModel, SolverConfig, SolverError};

pub use stats::{compare_groups, GroupComparison, GroupTest};

/// The penalty grid searched by cross-validation, in increasing order.
pub const DEFAULT_LAMBDA_GRID: [f64; 10] = [1e-15, 1e-10, 1e-8, 1e-4, 1e-3, 1e-2, 1.0, 5.0, 10.0, 20.0];

/// Slack under which two CV accuracies count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {class} has {count} sample(s); a split needs at least 2")]
    ClassTooSmall { class: u8, count: usize },
    #[error("{samples} samples cannot fill {folds} folds")]
    TooFewForFolds { samples: usize, folds: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("confusion matrix is empty")]
    EmptyEvaluation,
    #[error("classifier id must be 1-4, got {0}")]
    UnknownClassifier(u8),
    #[error("feature {0:?} not in dataset")]
    UnknownFeature(String),
    #[error("group statistic undefined: {0}")]
    UndefinedStatistic(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("writing report: {0}")]
    Io(#[from] std::io::Error),
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitPlan {
    pub train_fraction: f64,
    pub repetitions: usize,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            train_fraction: 0.9,
            repetitions: 20,
            stratified: true,
            seed: 0,
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EvalError::InvalidPlan(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if self.repetitions == 0 {
            return Err(EvalError::InvalidPlan("repetitions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CVPlan {
    pub folds: usize,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for CVPlan {
    fn default() -> Self {
        Self {
            folds: 10,
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            seed: 0,
        }
    }
}

impl CVPlan {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(EvalError::InvalidPlan("folds must be at least 2".into()));
        }
        if self.lambda_grid.is_empty() {
            return Err(EvalError::InvalidPlan("lambda grid is empty".into()));
        }
        if self.lambda_grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(EvalError::InvalidPlan("lambda grid values must be positive and finite".into()));
        }
        if self.lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::InvalidPlan("lambda grid must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// The four classifiers: LR, LR + L1, SVM, SVM + L1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Classifier {
    Lr,
    LrL1,
    Svm,
    SvmL1,
}

impl Classifier {
    pub const ALL: [Classifier; 4] = [Classifier::Lr, Classifier::LrL1, Classifier::Svm, Classifier::SvmL1];

    pub fn id(self) -> u8 {
        match self {
            Classifier::Lr => 1,
            Classifier::LrL1 => 2,
            Classifier::Svm => 3,
            Classifier::SvmL1 => 4,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.id() == id)
            .ok_or(EvalError::UnknownClassifier(id))
    }

    pub fn objective_kind(self) -> ObjectiveKind {
        match self {
            Classifier::Lr => ObjectiveKind::LogisticPlain,
            Classifier::LrL1 => ObjectiveKind::LogisticL1,
            Classifier::Svm => ObjectiveKind::HingePlain,
            Classifier::SvmL1 => ObjectiveKind::HingeL1,
        }
    }

    pub fn is_l1(self) -> bool {
        self.objective_kind().is_l1()
    }

    /// The unpenalized classifier of the same family.
    pub fn plain(self) -> Self {
        match self {
            Classifier::Lr | Classifier::LrL1 => Classifier::Lr,
            Classifier::Svm | Classifier::SvmL1 => Classifier::Svm,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Classifier::Lr => "LR",
            Classifier::LrL1 => "LR-L1",
            Classifier::Svm => "SVM",
            Classifier::SvmL1 => "SVM-L1",
        }
    }
}

impl TryFrom<u8> for Classifier {
    type Error = EvalError;
    fn try_from(id: u8) -> Result<Self> {
        Self::from_id(id)
    }
}

impl From<Classifier> for u8 {
    fn from(c: Classifier) -> u8 {
        c.id()
    }
}

impl std::fmt::Display for Classifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn class_members(labels: &[u8], class: u8) -> Vec<usize> {
    labels
        .iter()
        .enumerate()
        .filter(|(_, &y)| y == class)
        .map(|(i, _)| i)
        .collect()
}

/// `round(count · fraction)`, ties up.
fn train_count(count: usize, fraction: f64) -> usize {
    ((count as f64 * fraction) + 0.5).floor() as usize
}

/// Train and test indices (each ascending) for one repetition. With
/// stratification each class contributes `round(count · train_fraction)`
/// (ties up) training samples.
pub fn stratified_split(labels: &[u8], plan: &SplitPlan, repetition: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    plan.validate()?;
    let mut rng = SeededRng::new(derive_seed(plan.seed, repetition as u64));
    let groups: Vec<Vec<usize>> = if plan.stratified {
        [0u8, 1]
            .into_iter()
            .map(|c| {
                let members = class_members(labels, c);
                if members.len() < 2 {
                    Err(EvalError::ClassTooSmall { class: c, count: members.len() })
                } else {
                    Ok(members)
                }
            })
            .collect::<Result<_>>()?
    } else {
        for c in [0u8, 1] {
            let count = class_members(labels, c).len();
            if count < 2 {
                return Err(EvalError::ClassTooSmall { class: c, count });
            }
        }
        vec![(0..labels.len()).collect()]
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut members in groups {
        rng.shuffle(&mut members);
        let k = train_count(members.len(), plan.train_fraction);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified folds (each ascending): every class is shuffled, the classes
/// are concatenated and the sequence is dealt to folds round-robin, so fold
/// sizes differ by at most one.
pub fn kfold_indices(labels: &[u8], plan: &CVPlan) -> Result<Vec<Vec<usize>>> {
    plan.validate()?;
    let m = labels.len();
    if m < plan.folds {
        return Err(EvalError::TooFewForFolds { samples: m, folds: plan.folds });
    }
    let mut rng = SeededRng::new(plan.seed);
    let mut order = Vec::with_capacity(m);
    for c in [0u8, 1] {
        let mut members = class_members(labels, c);
        rng.shuffle(&mut members);
        order.extend(members);
    }
    let mut folds = vec![Vec::new(); plan.folds];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % plan.folds].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Which fitting step is about to consume a set of rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitStage {
    /// Training a model on one CV fold's training part (λ index given).
    CrossValidation { fold: usize, lambda_index: usize },
    /// The final fit on the repetition's training set.
    Final,
}

/// Receives `(repetition, stage, sample ids)` before each standardize+fit.
pub type FitObserver<'a> = &'a (dyn Fn(usize, FitStage, &[String]) + Sync);

fn no_observer(_: usize, _: FitStage, _: &[String]) {}

/// Per-λ CV accuracies, grid in increasing order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvTable {
    pub lambdas: Vec<f64>,
    /// `fold_accuracies[l][f]`: validation accuracy of λ index `l` on fold `f`.
    pub fold_accuracies: Vec<Vec<f64>>,
    pub mean_accuracies: Vec<f64>,
    pub best_lambda: f64,
}

impl CvTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let folds = self.fold_accuracies.first().map_or(0, Vec::len);
        write!(out, "lambda,cv_accuracy")?;
        for f in 0..folds {
            write!(out, ",fold_{f}")?;
        }
        writeln!(out)?;
        for ((l, mean), row) in self.lambdas.iter().zip(&self.mean_accuracies).zip(&self.fold_accuracies) {
            write!(out, "{l:e},{mean}")?;
            for a in row {
                write!(out, ",{a}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn accuracy_of(predicted: &[u8], labels: &[u8]) -> f64 {
    let hits = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

/// Chooses λ for an L1 objective by k-fold CV on `d_train`. Standardization is
/// refit on each fold's training part; along each fold the grid is solved
/// from the largest λ down, warm-starting from the previous solution. Ties in
/// mean accuracy go to the larger λ.
pub fn select_lambda(d_train: &Dataset, kind: ObjectiveKind, plan: &CVPlan, cfg: &SolverConfig) -> Result<CvTable> {
    select_lambda_observed(d_train, kind, plan, cfg, 0, &no_observer)
}

fn select_lambda_observed(
    d_train: &Dataset,
    kind: ObjectiveKind,
    plan: &CVPlan,
    cfg: &SolverConfig,
    repetition: usize,
    observer: FitObserver,
) -> Result<CvTable> {
    let kind = kind.penalized();
    let folds = kfold_indices(d_train.labels(), plan)?;
    let grid = &plan.lambda_grid;
    let per_fold: Vec<Vec<f64>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, val)| -> Result<Vec<f64>> {
            let mut in_val = vec![false; d_train.n_samples()];
            val.iter().for_each(|&i| in_val[i] = true);
            let train_rows: Vec<usize> = (0..d_train.n_samples()).filter(|&i| !in_val[i]).collect();
            let tr = d_train.select_rows(&train_rows);
            let va = d_train.select_rows(val);
            let mut acc = vec![0.0; grid.len()];
            let mut warm = None;
            for l in (0..grid.len()).rev() {
                observer(repetition, FitStage::CrossValidation { fold: f, lambda_index: l }, tr.sample_ids());
                let obj = ObjectiveSpec::l1(kind, grid[l])?;
                let fold_cfg = match warm.take() {
                    Some(w) => cfg.clone().with_initial_weights(w),
                    None => cfg.clone(),
                };
                let model = solvers::fit(&tr, &obj, &fold_cfg)?;
                acc[l] = accuracy_of(&solvers::predict(&model, &va)?, va.labels());
                warm = Some(model.weights);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let fold_accuracies: Vec<Vec<f64>> = (0..grid.len())
        .map(|l| per_fold.iter().map(|accs| accs[l]).collect())
        .collect();
    let mean_accuracies: Vec<f64> = fold_accuracies
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let mut best = grid.len() - 1;
    for l in (0..grid.len()).rev() {
        if mean_accuracies[l] > mean_accuracies[best] + TIE_TOL {
            best = l;
        }
    }
    Ok(CvTable {
        lambdas: grid.clone(),
        fold_accuracies,
        mean_accuracies,
        best_lambda: grid[best],
    })
}

/// Counts for class 1 as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Self {
        let mut cm = Self::default();
        for (&y, &p) in truth.iter().zip(predicted) {
            match (y, p) {
                (1, 1) => cm.tp += 1,
                (0, 1) => cm.fp += 1,
                (0, 0) => cm.tn += 1,
                _ => cm.fn_ += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }
}

/// Sensitivity (specificity) is `None` when the test part has no positive
/// (negative) samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    if cm.total() == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(Metrics {
        accuracy: (cm.tp + cm.tn) as f64 / cm.total() as f64,
        sensitivity: ratio(cm.tp, cm.positives()),
        specificity: ratio(cm.tn, cm.negatives()),
    })
}

/// `|accuracy - (sens·P + spec·N)/(P + N)|`, undefined terms having zero
/// weight.
pub fn decomposition_gap(cm: &ConfusionMatrix, m: &Metrics) -> f64 {
    let p = cm.positives() as f64;
    let n = cm.negatives() as f64;
    let weighted = m.sensitivity.unwrap_or(0.0) * p + m.specificity.unwrap_or(0.0) * n;
    (m.accuracy - weighted / (p + n)).abs()
}

/// Sample mean and standard deviation (denominator `count - 1`, 0 for a
/// single value).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, sd, count: values.len() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub repetition: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    /// Chosen by CV for L1 classifiers.
    pub lambda: Option<f64>,
    pub nonzero_weights: usize,
    pub converged: bool,
    pub kkt_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub modality: String,
    pub classifier: Classifier,
    pub accuracy: MeanSd,
    pub sensitivity: Option<MeanSd>,
    pub specificity: Option<MeanSd>,
    /// Mean count of exactly-nonzero weights across repetitions.
    pub mean_nonzero: f64,
    /// `mean_nonzero` rounded for display.
    pub selected_feature_count: usize,
    pub feature_count: usize,
    pub chosen_lambdas: Vec<Option<f64>>,
    /// Repetitions whose test part lacked positives / negatives.
    pub undefined_sensitivity: usize,
    pub undefined_specificity: usize,
    pub nonconverged_fits: usize,
    pub repetitions: Vec<RepetitionRecord>,
}

/// Column order of the results table.
pub const RESULTS_HEADER: [&str; 9] = [
    "modality",
    "classifier",
    "acc_mean",
    "acc_sd",
    "sens_mean",
    "sens_sd",
    "spec_mean",
    "spec_sd",
    "n_features",
];
pub const RESULTS_SCHEMA: &str = "sparsebench-results/1";

impl EvalReport {
    pub fn csv_record(&self) -> Vec<String> {
        let pair = |v: &Option<MeanSd>| match v {
            Some(s) => (s.mean.to_string(), s.sd.to_string()),
            None => ("NA".to_string(), "NA".to_string()),
        };
        let (sens_mean, sens_sd) = pair(&self.sensitivity);
        let (spec_mean, spec_sd) = pair(&self.specificity);
        vec![
            self.modality.clone(),
            self.classifier.id().to_string(),
            self.accuracy.mean.to_string(),
            self.accuracy.sd.to_string(),
            sens_mean,
            sens_sd,
            spec_mean,
            spec_sd,
            self.selected_feature_count.to_string(),
        ]
    }
}

/// Writes `# schema: ...`, then the header and one row per report.
pub fn write_results_csv<W: Write>(reports: &[EvalReport], mut out: W) -> Result<()> {
    writeln!(out, "# schema: {RESULTS_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(csv_io)?;
    for r in reports {
        w.write_record(r.csv_record()).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> EvalError {
    EvalError::Io(std::io::Error::other(e))
}

/// A protocol run with everything needed downstream.
#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub report: EvalReport,
    /// Final model of each repetition, in repetition order.
    pub models: Vec<LinearModel>,
    /// CV tables of each repetition (L1 classifiers only).
    pub cv_tables: Vec<CvTable>,
}

/// Runs the protocol on the columns of `modality`.
pub fn run_protocol(
    d: &Dataset,
    modality: &ModalitySpec,
    classifier: Classifier,
    split: &SplitPlan,
    cv: &CVPlan,
    cfg: &SolverConfig,
) -> Result<EvalReport> {
    Ok(run_protocol_detailed(d, modality, classifier, split, cv, cfg, &no_observer)?.report)
}

pub fn run_protocol_detailed(
    d: &Dataset,
    modality: &ModalitySpec,
    classifier: Classifier,
    split: &SplitPlan,
    cv: &CVPlan,
    cfg: &SolverConfig,
    observer: FitObserver,
) -> Result<ProtocolRun> {
    if classifier.is_l1() {
        cv.validate()?;
    }
    protocol(d, std::slice::from_ref(modality), classifier, split, Penalty::CrossValidated(cv), cfg, observer)
}

/// The protocol with a separate column set per repetition, so that columns
/// chosen from repetition `r`'s training part are scored on its test part.
/// Reports carry the name and width of `modalities[0]`.
pub fn run_protocol_per_repetition(
    d: &Dataset,
    modalities: &[ModalitySpec],
    classifier: Classifier,
    split: &SplitPlan,
    cv: &CVPlan,
    cfg: &SolverConfig,
) -> Result<EvalReport> {
    if modalities.len() != split.repetitions {
        return Err(EvalError::InvalidPlan(format!(
            "{} column sets for {} repetitions",
            modalities.len(),
            split.repetitions
        )));
    }
    if classifier.is_l1() {
        cv.validate()?;
    }
    Ok(protocol(d, modalities, classifier, split, Penalty::CrossValidated(cv), cfg, &no_observer)?.report)
}

/// The protocol with λ fixed instead of cross-validated (L1 classifiers).
pub fn run_protocol_fixed_lambda(
    d: &Dataset,
    modality: &ModalitySpec,
    classifier: Classifier,
    split: &SplitPlan,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<ProtocolRun> {
    protocol(d, std::slice::from_ref(modality), classifier, split, Penalty::Fixed(lambda), cfg, &no_observer)
}

#[derive(Clone, Copy)]
enum Penalty<'a> {
    CrossValidated(&'a CVPlan),
    Fixed(f64),
}

/// `modalities` holds one shared column set or one per repetition.
fn protocol(
    d: &Dataset,
    modalities: &[ModalitySpec],
    classifier: Classifier,
    split: &SplitPlan,
    penalty: Penalty,
    cfg: &SolverConfig,
    observer: FitObserver,
) -> Result<ProtocolRun> {
    split.validate()?;
    cfg.validate()?;
    let modality = &modalities[0];
    let datas = modalities
        .iter()
        .map(|m| dataset::assemble_modality(d, m))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    datas[0].require_both_classes()?;

    struct Rep {
        record: RepetitionRecord,
        model: LinearModel,
        table: Option<CvTable>,
    }

    let reps: Vec<Rep> = (0..split.repetitions)
        .into_par_iter()
        .map(|rep| -> Result<Rep> {
            let data = &datas[rep % datas.len()];
            let (train_idx, test_idx) = stratified_split(data.labels(), split, rep)?;
            let train = data.select_rows(&train_idx);
            let test = data.select_rows(&test_idx);
            let (obj, table) = match penalty {
                _ if !classifier.is_l1() => (ObjectiveSpec::plain(classifier.objective_kind()), None),
                Penalty::Fixed(lambda) => (ObjectiveSpec::l1(classifier.objective_kind(), lambda)?, None),
                Penalty::CrossValidated(cv) => {
                    let fold_plan = CVPlan {
                        seed: derive_seed(cv.seed, rep as u64),
                        ..cv.clone()
                    };
                    let table =
                        select_lambda_observed(&train, classifier.objective_kind(), &fold_plan, cfg, rep, observer)?;
                    (ObjectiveSpec::l1(classifier.objective_kind(), table.best_lambda)?, Some(table))
                }
            };
            observer(rep, FitStage::Final, train.sample_ids());
            let model = solvers::fit(&train, &obj, cfg)?;
            let predicted = solvers::predict(&model, &test)?;
            let confusion = ConfusionMatrix::from_predictions(test.labels(), &predicted);
            let metrics = compute_metrics(&confusion)?;
            let gap = decomposition_gap(&confusion, &metrics);
            assert!(gap <= 1e-12, "accuracy decomposition violated by {gap:e} in repetition {rep}");
            let record = RepetitionRecord {
                repetition: rep,
                train_size: train.n_samples(),
                test_size: test.n_samples(),
                confusion,
                metrics,
                lambda: classifier.is_l1().then_some(obj.lambda()),
                nonzero_weights: model.nonzero_count(),
                converged: model.diagnostics.converged,
                kkt_violation: model.diagnostics.kkt_violation,
            };
            Ok(Rep { record, model, table })
        })
        .collect::<Result<_>>()?;

    let records: Vec<RepetitionRecord> = reps.iter().map(|r| r.record.clone()).collect();
    let accs: Vec<f64> = records.iter().map(|r| r.metrics.accuracy).collect();
    let sens: Vec<f64> = records.iter().filter_map(|r| r.metrics.sensitivity).collect();
    let spec: Vec<f64> = records.iter().filter_map(|r| r.metrics.specificity).collect();
    let undefined_sensitivity = records.len() - sens.len();
    let undefined_specificity = records.len() - spec.len();
    if undefined_sensitivity + undefined_specificity > 0 {
        warn!(
            "{} {}: {undefined_sensitivity} repetition(s) without positives, {undefined_specificity} without negatives in the test part",
            modality.name, classifier
        );
    }
    let nonconverged_fits = records.iter().filter(|r| !r.converged).count();
    if nonconverged_fits > 0 {
        warn!("{} {}: {nonconverged_fits} final fit(s) hit the iteration budget", modality.name, classifier);
    }
    let mean_nonzero = records.iter().map(|r| r.nonzero_weights as f64).sum::<f64>() / records.len() as f64;
    let report = EvalReport {
        modality: modality.name.clone(),
        classifier,
        accuracy: MeanSd::of(&accs).expect("at least one repetition"),
        sensitivity: MeanSd::of(&sens),
        specificity: MeanSd::of(&spec),
        mean_nonzero,
        selected_feature_count: mean_nonzero.round() as usize,
        feature_count: datas[0].n_features(),
        chosen_lambdas: records.iter().map(|r| r.lambda).collect(),
        undefined_sensitivity,
        undefined_specificity,
        nonconverged_fits,
        repetitions: records,
    };
    let mut models = Vec::with_capacity(reps.len());
    let mut cv_tables = Vec::new();
    for r in reps {
        models.push(r.model);
        cv_tables.extend(r.table);
    }
    Ok(ProtocolRun { report, models, cv_tables })
}
