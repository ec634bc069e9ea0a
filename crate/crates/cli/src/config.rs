//! The experiment document and its resolution against data on disk.
//!
//! Relative paths inside a config are taken relative to the config file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use ndarray::{concatenate, Axis};
use serde::{Deserialize, Serialize};
use sparsebench::dataset::{self, CsvLayout, Dataset, DatasetError, ModalitySpec};
use sparsebench::evaluation::{CVPlan, Classifier, SplitPlan};
use sparsebench::synthgen::{self, SyntheticSpec};
use sparsebench::SolverConfig;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form cohort label, e.g. "Group One / 36 months".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub data: DataSource,
    pub modalities: Vec<ModalityDef>,
    #[serde(default = "all_classifiers")]
    pub classifiers: Vec<Classifier>,
    #[serde(default)]
    pub split: SplitPlan,
    #[serde(default)]
    pub cv: CVPlan,
    #[serde(default)]
    pub solver: SolverConfig,
    /// When set, replaces both the split and the CV seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Ranked features written per L1 classifier and modality.
    #[serde(default = "default_top_features")]
    pub top_features: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<CurveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_stats: Option<GroupStatsConfig>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn all_classifiers() -> Vec<Classifier> {
    Classifier::ALL.to_vec()
}

fn default_top_features() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv(CsvSource),
    Synthetic(SyntheticSpec),
}

/// One or more CSV files joined on the id column. The label is read from
/// the first file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub paths: Vec<PathBuf>,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default = "default_id_column")]
    pub id_column: String,
    /// Extra spellings of the positive / negative label.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub positive_labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negative_labels: Vec<String>,
}

fn default_label_column() -> String {
    "label".into()
}

fn default_id_column() -> String {
    "id".into()
}

/// Exactly one of `features`, `list_file`, `union` or `all` is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list_file: Option<PathBuf>,
    /// Names of earlier modalities, concatenated in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub union: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub all: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    /// Largest feature count; capped at each modality's size.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Modalities to trace; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modalities: Option<Vec<String>>,
}

fn default_k_max() -> usize {
    15
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupStatsConfig {
    /// Features to compare; every modality feature when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    /// Features with at most this many distinct values use the chi-square test.
    #[serde(default = "default_levels")]
    pub chi_square_max_levels: usize,
}

fn default_levels() -> usize {
    5
}

impl ExperimentConfig {
    /// Reads and parses a config; syntax and schema errors carry the
    /// line and column of the offending JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigSyntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Makes relative paths relative to `base` and applies the seed override.
    pub fn resolve(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataSource::Csv(src) = &mut self.data {
            src.paths.iter_mut().for_each(fix);
        }
        for m in &mut self.modalities {
            if let Some(p) = &mut m.list_file {
                fix(p);
            }
        }
        fix(&mut self.output);
        self.apply_seed();
        self
    }

    fn apply_seed(&mut self) {
        if let Some(s) = self.seed {
            self.split.seed = s;
            self.cv.seed = s;
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.apply_seed();
    }

    /// Checks everything that does not need the data itself.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.modalities.is_empty() {
            return bad("`modalities` is empty".into());
        }
        let mut names = HashSet::new();
        for m in &self.modalities {
            if m.name.trim().is_empty() {
                return bad("modality with an empty name".into());
            }
            if !names.insert(m.name.as_str()) {
                return bad(format!("modality `{}` is defined twice", m.name));
            }
            let given = [m.features.is_some(), m.list_file.is_some(), m.union.is_some(), m.all];
            if given.iter().filter(|g| **g).count() != 1 {
                return bad(format!(
                    "modality `{}` needs exactly one of `features`, `list_file`, `union`, `all`",
                    m.name
                ));
            }
            if let Some(p) = &m.list_file {
                if !p.is_file() {
                    return bad(format!("modality `{}`: list file {} not found", m.name, p.display()));
                }
            }
        }
        if self.classifiers.is_empty() {
            return bad("`classifiers` is empty".into());
        }
        let unique: HashSet<_> = self.classifiers.iter().collect();
        if unique.len() != self.classifiers.len() {
            return bad("`classifiers` lists a classifier twice".into());
        }
        if self.top_features == 0 {
            return bad("`top_features` must be at least 1".into());
        }
        if let Some(c) = &self.curves {
            if c.k_max == 0 {
                return bad("`curves.k_max` must be at least 1".into());
            }
            for m in c.modalities.iter().flatten() {
                if !names.contains(m.as_str()) {
                    return bad(format!("`curves.modalities` names unknown modality `{m}`"));
                }
            }
        }
        match &self.data {
            DataSource::Csv(src) => {
                if src.paths.is_empty() {
                    return bad("`data.csv.paths` is empty".into());
                }
                for p in &src.paths {
                    if !p.is_file() {
                        return bad(format!("data file {} not found", p.display()));
                    }
                }
            }
            DataSource::Synthetic(spec) => spec.validate()?,
        }
        self.split.validate()?;
        self.cv.validate()?;
        self.solver.validate()?;
        Ok(())
    }
}

/// A config resolved against its data.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub data: Dataset,
    pub modalities: Vec<ModalitySpec>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let data = load_data(&config.data)?;
        let modalities = resolve_modalities(&config.modalities, &data)?;
        Ok(Self { config, data, modalities })
    }

    pub fn modality(&self, name: &str) -> Option<&ModalitySpec> {
        self.modalities.iter().find(|m| m.name == name)
    }
}

pub fn load_data(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::Synthetic(spec) => Ok(synthgen::generate(spec)?.0),
        DataSource::Csv(src) => load_joined(src),
    }
}

fn load_joined(src: &CsvSource) -> Result<Dataset> {
    let mut layout = CsvLayout::new(src.label_column.clone(), src.id_column.clone());
    layout.positive_labels.extend(src.positive_labels.iter().cloned());
    layout.negative_labels.extend(src.negative_labels.iter().cloned());
    let first = dataset::load_csv_with(&src.paths[0], &layout)?;
    if src.paths.len() == 1 {
        return Ok(first);
    }
    let mut blocks = vec![first.features().clone()];
    let mut names = first.feature_names().to_vec();
    for path in &src.paths[1..] {
        let (part, labeled) = match dataset::load_csv_with(path, &layout) {
            Ok(d) => (d, true),
            Err(DatasetError::MissingColumn(c)) if c == src.label_column => {
                (dataset::load_csv_with(path, &CsvLayout::unlabeled(src.id_column.clone()))?, false)
            }
            Err(e) => return Err(e.into()),
        };
        let rows = first
            .sample_ids()
            .iter()
            .map(|id| {
                part.sample_ids().iter().position(|p| p == id).ok_or_else(|| {
                    CliError::Data(format!("{} has no row for sample `{id}`", path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if part.n_samples() != rows.len() {
            return Err(CliError::Data(format!(
                "{} has {} rows, {} has {}",
                path.display(),
                part.n_samples(),
                src.paths[0].display(),
                rows.len()
            )));
        }
        let aligned = part.select_rows(&rows);
        if labeled && aligned.labels() != first.labels() {
            return Err(CliError::Data(format!("{} disagrees on labels", path.display())));
        }
        blocks.push(aligned.features().clone());
        names.extend(aligned.feature_names().iter().cloned());
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let x = concatenate(Axis(1), &views).expect("blocks share the row count");
    Ok(Dataset::new(x, first.labels().to_vec(), names, first.sample_ids().to_vec())?)
}

/// Turns modality definitions into feature lists, checked against `d`.
pub fn resolve_modalities(defs: &[ModalityDef], d: &Dataset) -> Result<Vec<ModalitySpec>> {
    let mut out: Vec<ModalitySpec> = Vec::with_capacity(defs.len());
    for def in defs {
        let spec = if let Some(f) = &def.features {
            ModalitySpec::new(def.name.clone(), f.clone())?
        } else if let Some(p) = &def.list_file {
            ModalitySpec::from_list_file(def.name.clone(), p)?
        } else if let Some(parts) = &def.union {
            let mut features = Vec::new();
            let mut seen = HashSet::new();
            for part in parts {
                let m = out.iter().find(|m| &m.name == part).ok_or_else(|| {
                    CliError::Config(format!(
                        "modality `{}` unions `{part}`, which is not defined before it",
                        def.name
                    ))
                })?;
                for f in &m.selected_features {
                    if seen.insert(f.clone()) {
                        features.push(f.clone());
                    }
                }
            }
            ModalitySpec::new(def.name.clone(), features)?
        } else {
            ModalitySpec::all_of(def.name.clone(), d)
        };
        dataset::assemble_modality(d, &spec)?;
        out.push(spec);
    }
    Ok(out)
}
