//! Labelled feature tables: CSV ingestion, modality assembly and z-scoring.
//!
//! A [`Dataset`] is immutable once built. Row and column subsets produce new
//! datasets, so train/test partitions never alias each other.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("header is missing required column `{0}`")]
    MissingColumn(String),
    #[error("header contains duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("data row {row}, column `{column}`: `{value}` is not a number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("data row {row}, column `{column}`: non-finite value `{value}`")]
    NonFinite {
        row: usize,
        column: String,
        value: String,
    },
    #[error("data row {row}: label `{value}` is not 0 or 1")]
    BadLabel { row: usize, value: String },
    #[error("data row {row} has {found} fields, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate sample id `{0}`")]
    DuplicateSampleId(String),
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("modality `{0}` selects no features")]
    EmptyModality(String),
    #[error("modality `{modality}` references unknown feature `{feature}`")]
    UnknownFeature { modality: String, feature: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} samples, have {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("labels contain a single class; both 0 and 1 are required")]
    SingleClass,
    #[error("label values must be 0 or 1, found {0}")]
    InvalidLabel(u8),
    #[error("feature matrix contains a non-finite value at ({row}, {column})")]
    NonFiniteMatrix { row: usize, column: usize },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Feature matrix with binary labels, `M` samples by `N` features.
///
/// Label 1 is the positive class (converter), 0 the negative class (stable).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    sample_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        let (m, n) = features.dim();
        if labels.len() != m {
            return Err(DatasetError::DimensionMismatch {
                expected: m,
                found: labels.len(),
            });
        }
        if sample_ids.len() != m {
            return Err(DatasetError::DimensionMismatch {
                expected: m,
                found: sample_ids.len(),
            });
        }
        if feature_names.len() != n {
            return Err(DatasetError::DimensionMismatch {
                expected: n,
                found: feature_names.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(DatasetError::InvalidLabel(bad));
        }
        if let Some(dup) = first_duplicate(&feature_names) {
            return Err(DatasetError::DuplicateFeature(dup.to_string()));
        }
        if let Some(dup) = first_duplicate(&sample_ids) {
            return Err(DatasetError::DuplicateSampleId(dup.to_string()));
        }
        if let Some(((row, column), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DatasetError::NonFiniteMatrix { row, column });
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            sample_ids,
        })
    }

    /// Builds a dataset with generated names `f0..` and ids `s0..`.
    pub fn from_matrix(features: Array2<f64>, labels: Vec<u8>) -> Result<Self> {
        let (m, n) = features.dim();
        let names = (0..n).map(|j| format!("f{j}")).collect();
        let ids = (0..m).map(|i| format!("s{i}")).collect();
        Self::new(features, labels, names, ids)
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        (self.labels.len() - pos, pos)
    }

    pub fn positive_rate(&self) -> f64 {
        self.class_counts().1 as f64 / self.n_samples() as f64
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let (neg, pos) = self.class_counts();
        if neg == 0 || pos == 0 {
            return Err(DatasetError::SingleClass);
        }
        Ok(())
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            sample_ids: rows.iter().map(|&i| self.sample_ids[i].clone()).collect(),
        }
    }

    /// New dataset holding the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(1), columns),
            labels: self.labels.clone(),
            feature_names: columns
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            sample_ids: self.sample_ids.clone(),
        }
    }

    /// Column indices of `names`, failing on the first unknown name.
    pub fn resolve_features(&self, names: &[String]) -> std::result::Result<Vec<usize>, String> {
        let index: HashMap<&str, usize> = self
            .feature_names
            .iter()
            .enumerate()
            .map(|(j, f)| (f.as_str(), j))
            .collect();
        names
            .iter()
            .map(|name| index.get(name.as_str()).copied().ok_or_else(|| name.clone()))
            .collect()
    }

    /// Replaces the feature matrix, keeping names, ids and labels.
    pub(crate) fn with_features(&self, features: Array2<f64>) -> Dataset {
        debug_assert_eq!(features.dim(), self.features.dim());
        Dataset {
            features,
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
            sample_ids: self.sample_ids.clone(),
        }
    }
}

fn first_duplicate(items: &[String]) -> Option<&str> {
    let mut seen = HashSet::with_capacity(items.len());
    items
        .iter()
        .find(|s| !seen.insert(s.as_str()))
        .map(String::as_str)
}

/// Which header columns carry the label and the sample id, and which label
/// spellings map to each class.
#[derive(Clone, Debug)]
pub struct CsvLayout {
    /// `None` reads unlabeled rows; every label is then 0.
    pub label_column: Option<String>,
    pub id_column: String,
    pub positive_labels: Vec<String>,
    pub negative_labels: Vec<String>,
}

impl CsvLayout {
    pub fn new(label_column: impl Into<String>, id_column: impl Into<String>) -> Self {
        Self {
            label_column: Some(label_column.into()),
            id_column: id_column.into(),
            positive_labels: vec!["1".into(), "1.0".into()],
            negative_labels: vec!["0".into(), "0.0".into()],
        }
    }

    /// Layout for prediction inputs that carry no label column.
    pub fn unlabeled(id_column: impl Into<String>) -> Self {
        Self {
            label_column: None,
            ..Self::new("", id_column)
        }
    }

    fn parse_label(&self, raw: &str) -> Option<u8> {
        let raw = raw.trim();
        if self.positive_labels.iter().any(|p| p == raw) {
            Some(1)
        } else if self.negative_labels.iter().any(|n| n == raw) {
            Some(0)
        } else {
            None
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, label_column: &str, id_column: &str) -> Result<Dataset> {
    load_csv_with(path, &CsvLayout::new(label_column, id_column))
}

pub fn load_csv_with(path: impl AsRef<Path>, layout: &CsvLayout) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, layout)
}

/// Parses a dataset from CSV text. Data rows are numbered from 1.
pub fn read_csv<R: Read>(input: R, layout: &CsvLayout) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if let Some(dup) = first_duplicate(&header) {
        return Err(DatasetError::DuplicateColumn(dup.to_string()));
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let label_col = layout.label_column.as_deref().map(find).transpose()?;
    let id_col = find(&layout.id_column)?;
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| Some(c) != label_col && c != id_col)
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(DatasetError::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let label = match label_col {
            Some(c) => layout.parse_label(&record[c]).ok_or_else(|| DatasetError::BadLabel {
                row,
                value: record[c].to_string(),
            })?,
            None => 0,
        };
        labels.push(label);
        ids.push(record[id_col].trim().to_string());
        for &c in &feature_cols {
            let cell = record[c].trim();
            let v: f64 = cell.parse().map_err(|_| DatasetError::NonNumeric {
                row,
                column: header[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFinite {
                    row,
                    column: header[c].clone(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
    }
    let m = labels.len();
    let features = Array2::from_shape_vec((m, feature_cols.len()), values)
        .expect("row-major buffer matches shape");
    let names = feature_cols.iter().map(|&c| header[c].clone()).collect();
    Dataset::new(features, labels, names, ids)
}

/// Writes `id, features..., label` with shortest round-trip float formatting.
pub fn write_csv<W: Write>(d: &Dataset, out: W, id_column: &str, label_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = Vec::with_capacity(d.n_features() + 2);
    header.push(id_column.to_string());
    header.extend(d.feature_names().iter().cloned());
    header.push(label_column.to_string());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (i, row) in d.features().outer_iter().enumerate() {
        record.clear();
        record.push(d.sample_ids()[i].clone());
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(d.labels()[i].to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(|source| DatasetError::Io {
        path: PathBuf::from("<csv output>"),
        source,
    })?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>, id_column: &str, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(d, std::io::BufWriter::new(file), id_column, label_column)
}

/// Named, ordered feature subset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalitySpec {
    pub name: String,
    pub selected_features: Vec<String>,
}

impl ModalitySpec {
    pub fn new(name: impl Into<String>, selected_features: Vec<String>) -> Result<Self> {
        let name = name.into();
        if selected_features.is_empty() {
            return Err(DatasetError::EmptyModality(name));
        }
        if let Some(dup) = first_duplicate(&selected_features) {
            return Err(DatasetError::DuplicateFeature(dup.to_string()));
        }
        Ok(Self {
            name,
            selected_features,
        })
    }

    /// Every feature of `d`, in column order.
    pub fn all_of(name: impl Into<String>, d: &Dataset) -> Self {
        Self {
            name: name.into(),
            selected_features: d.feature_names().to_vec(),
        }
    }

    pub fn from_list_file(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(name, parse_feature_list(&text))
    }

    pub fn len(&self) -> usize {
        self.selected_features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected_features.is_empty()
    }
}

/// One feature name per line; blank lines and `#` comments are ignored.
pub fn parse_feature_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(str::to_string)
        .collect()
}

/// Restricts `d` to the modality's columns, in the modality's order.
pub fn assemble_modality(d: &Dataset, spec: &ModalitySpec) -> Result<Dataset> {
    if spec.selected_features.is_empty() {
        return Err(DatasetError::EmptyModality(spec.name.clone()));
    }
    if let Some(dup) = first_duplicate(&spec.selected_features) {
        return Err(DatasetError::DuplicateFeature(dup.to_string()));
    }
    let columns = d
        .resolve_features(&spec.selected_features)
        .map_err(|feature| DatasetError::UnknownFeature {
            modality: spec.name.clone(),
            feature,
        })?;
    Ok(d.select_columns(&columns))
}

/// Prior-knowledge MRI pre-selection: 26 regional volumes (hippocampus,
/// lobar white matter, cingulate, entorhinal, frontal, precuneus and
/// superior parietal regions, right then left).
pub const PRESELECTED_ROIS: [&str; 26] = [
    "HippoR", "HippoL", "flWMR", "flWML", "plWMR", "plWML", "tlWMR", "tlWML", "ACgCR", "ACgCL",
    "EntR", "EntL", "MCgCR", "MCgCL", "MFCR", "MFCL", "OpIFGR", "OpIFGL", "OrIFGR", "OrIFGL",
    "PCgCR", "PCgCL", "PCuR", "PCuL", "SPLR", "SPLL",
];

pub fn preselected_roi_modality(name: impl Into<String>) -> ModalitySpec {
    ModalitySpec {
        name: name.into(),
        selected_features: PRESELECTED_ROIS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Per-column location and scale fitted on a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
    /// Columns that were constant when fitted; their scale is 1.
    pub constant_columns: Vec<bool>,
}

impl StandardizationParams {
    /// Means 0 and scales 1: applying it leaves features unchanged.
    pub fn identity(n: usize) -> Self {
        Self {
            means: vec![0.0; n],
            std_devs: vec![1.0; n],
            constant_columns: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn constant_count(&self) -> usize {
        self.constant_columns.iter().filter(|&&c| c).count()
    }

    pub fn select(&self, columns: &[usize]) -> Self {
        Self {
            means: columns.iter().map(|&j| self.means[j]).collect(),
            std_devs: columns.iter().map(|&j| self.std_devs[j]).collect(),
            constant_columns: columns.iter().map(|&j| self.constant_columns[j]).collect(),
        }
    }
}

/// Column means and sample standard deviations (denominator `M - 1`).
pub fn fit_standardizer(d: &Dataset) -> Result<StandardizationParams> {
    let m = d.n_samples();
    if m < 2 {
        return Err(DatasetError::TooFewSamples { needed: 2, found: m });
    }
    let x = d.features();
    let n = x.ncols();
    let mut means = Vec::with_capacity(n);
    let mut std_devs = Vec::with_capacity(n);
    let mut constant = Vec::with_capacity(n);
    for col in x.columns() {
        let mean = col.sum() / m as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (m - 1) as f64).sqrt();
        let first = col[0];
        let is_constant = col.iter().all(|&v| v == first) || sd == 0.0;
        means.push(mean);
        std_devs.push(if is_constant { 1.0 } else { sd });
        constant.push(is_constant);
    }
    Ok(StandardizationParams {
        means,
        std_devs,
        constant_columns: constant,
    })
}

pub fn apply_standardizer(d: &Dataset, p: &StandardizationParams) -> Result<Dataset> {
    if p.len() != d.n_features() {
        return Err(DatasetError::DimensionMismatch {
            expected: p.len(),
            found: d.n_features(),
        });
    }
    let means = Array1::from(p.means.clone());
    let sds = Array1::from(p.std_devs.clone());
    let z = (d.features() - &means) / &sds;
    Ok(d.with_features(z))
}

/// Inverse of [`apply_standardizer`]: `z * sd + mean`.
pub fn destandardize(d: &Dataset, p: &StandardizationParams) -> Result<Dataset> {
    if p.len() != d.n_features() {
        return Err(DatasetError::DimensionMismatch {
            expected: p.len(),
            found: d.n_features(),
        });
    }
    let means = Array1::from(p.means.clone());
    let sds = Array1::from(p.std_devs.clone());
    let x = d.features() * &sds + &means;
    Ok(d.with_features(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn small() -> Dataset {
        Dataset::new(
            array![[1.0, 10.0, 5.0], [2.0, 20.0, 5.0], [3.0, 30.0, 5.0], [4.0, 15.0, 5.0]],
            vec![0, 1, 0, 1],
            vec!["a".into(), "b".into(), "c".into()],
            vec!["p1".into(), "p2".into(), "p3".into(), "p4".into()],
        )
        .unwrap()
    }

    #[test]
    fn reads_shape_from_csv() {
        let text = "id,a,b,label,c\np1,1,2,0,3\np2,4,5,1,6\np3,7,8,1,9\np4,0.5,1e3,0,-2\n";
        let d = read_csv(text.as_bytes(), &CsvLayout::new("label", "id")).unwrap();
        assert_eq!(d.n_samples(), 4);
        assert_eq!(d.n_features(), 3);
        assert_eq!(d.feature_names(), ["a", "b", "c"]);
        assert_eq!(d.labels(), [0, 1, 1, 0]);
        assert_eq!(d.features()[[3, 1]], 1000.0);
    }

    #[test]
    fn unlabeled_rows_keep_every_other_column() {
        let text = "id,a,b\np1,1,2\np2,3,4\n";
        let d = read_csv(text.as_bytes(), &CsvLayout::unlabeled("id")).unwrap();
        assert_eq!(d.feature_names(), ["a", "b"]);
        assert_eq!(d.labels(), [0, 0]);
        assert!(read_csv(text.as_bytes(), &CsvLayout::new("label", "id")).is_err());
    }

    #[test]
    fn bad_label_names_row() {
        let text = "id,a,label\np1,1,0\np2,2,2\n";
        let err = read_csv(text.as_bytes(), &CsvLayout::new("label", "id")).unwrap_err();
        assert!(matches!(err, DatasetError::BadLabel { row: 2, .. }), "{err}");
    }

    #[test]
    fn label_aliases() {
        let mut layout = CsvLayout::new("dx", "id");
        layout.positive_labels.push("MCI-C".into());
        layout.negative_labels.push("MCI-S".into());
        let text = "id,a,dx\np1,1,MCI-C\np2,2,MCI-S\n";
        let d = read_csv(text.as_bytes(), &layout).unwrap();
        assert_eq!(d.labels(), [1, 0]);
    }

    #[test]
    fn ingestion_errors() {
        let layout = CsvLayout::new("label", "id");
        let cases = [
            ("id,a,a,label\np1,1,2,0\n", "duplicate"),
            ("id,a\np1,1\n", "missing"),
            ("id,a,label\np1,x,0\n", "non-numeric"),
            ("id,a,label\np1,NaN,0\n", "non-finite"),
            ("id,a,label\np1,inf,0\n", "non-finite"),
            ("id,a,label\np1,,0\n", "non-numeric"),
            ("id,a,label\np1,1\n", "ragged"),
        ];
        for (text, what) in cases {
            let err = read_csv(text.as_bytes(), &layout).unwrap_err();
            let ok = match what {
                "duplicate" => matches!(err, DatasetError::DuplicateColumn(_)),
                "missing" => matches!(err, DatasetError::MissingColumn(_)),
                "non-numeric" => matches!(err, DatasetError::NonNumeric { row: 1, .. }),
                "non-finite" => matches!(err, DatasetError::NonFinite { row: 1, .. }),
                "ragged" => matches!(err, DatasetError::RaggedRow { row: 1, .. }),
                _ => unreachable!(),
            };
            assert!(ok, "{what}: {err}");
        }
        assert!(matches!(
            load_csv("/definitely/not/here.csv", "label", "id"),
            Err(DatasetError::Io { .. })
        ));
    }

    #[test]
    fn assemble_identity_and_order() {
        let d = small();
        let all = ModalitySpec::all_of("all", &d);
        assert_eq!(assemble_modality(&d, &all).unwrap(), d);
        let spec = ModalitySpec::new("ca", vec!["c".into(), "a".into()]).unwrap();
        let sub = assemble_modality(&d, &spec).unwrap();
        assert_eq!(sub.feature_names(), ["c", "a"]);
        assert_eq!(sub.features().column(1), d.features().column(0));
        assert_eq!(sub.labels(), d.labels());
        assert_eq!(sub.sample_ids(), d.sample_ids());
        assert_eq!(assemble_modality(&sub, &spec).unwrap(), sub);
    }

    #[test]
    fn assemble_rejects_empty_and_unknown() {
        let d = small();
        assert!(matches!(
            ModalitySpec::new("none", vec![]),
            Err(DatasetError::EmptyModality(_))
        ));
        let empty = ModalitySpec {
            name: "none".into(),
            selected_features: vec![],
        };
        assert!(matches!(
            assemble_modality(&d, &empty),
            Err(DatasetError::EmptyModality(_))
        ));
        let spec = ModalitySpec::new("x", vec!["a".into(), "zz".into()]).unwrap();
        match assemble_modality(&d, &spec) {
            Err(DatasetError::UnknownFeature { feature, .. }) => assert_eq!(feature, "zz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn preselection_list_over_full_roi_table() {
        let mut names: Vec<String> = (0..233).map(|j| format!("roi{j}")).collect();
        names.extend(PRESELECTED_ROIS.iter().rev().map(|s| s.to_string()));
        assert_eq!(names.len(), 259);
        let m = 3;
        let d = Dataset::new(
            Array2::from_shape_fn((m, 259), |(i, j)| (i * 259 + j) as f64),
            vec![0, 1, 0],
            names,
            (0..m).map(|i| format!("p{i}")).collect(),
        )
        .unwrap();
        let spec = preselected_roi_modality("ROI-P");
        let sub = assemble_modality(&d, &spec).unwrap();
        assert_eq!(sub.n_features(), PRESELECTED_ROIS.len());
        assert_eq!(sub.feature_names(), PRESELECTED_ROIS);
    }

    #[test]
    fn feature_list_parsing() {
        let text = "# pre-selected\nHippoR\n  HippoL  # left\n\nEntR\n";
        assert_eq!(parse_feature_list(text), ["HippoR", "HippoL", "EntR"]);
    }

    #[test]
    fn standardizer_arithmetic() {
        let d = Dataset::from_matrix(array![[1.0], [2.0], [3.0]], vec![0, 1, 0]).unwrap();
        let p = fit_standardizer(&d).unwrap();
        assert_eq!(p.means, [2.0]);
        assert_eq!(p.std_devs, [1.0]);
        let z = apply_standardizer(&d, &p).unwrap();
        assert_eq!(z.features().column(0).to_vec(), [-1.0, 0.0, 1.0]);
    }

    #[test]
    fn standardized_columns_have_unit_moments() {
        let d = small();
        let p = fit_standardizer(&d).unwrap();
        assert_eq!(p.constant_columns, [false, false, true]);
        assert_eq!(p.std_devs[2], 1.0);
        let z = apply_standardizer(&d, &p).unwrap();
        let m = z.n_samples() as f64;
        for (j, col) in z.features().columns().into_iter().enumerate() {
            let mean = col.sum() / m;
            assert!(mean.abs() < 1e-12);
            if !p.constant_columns[j] {
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
                assert!((var.sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn standardizer_needs_two_rows_and_matching_width() {
        let one = Dataset::from_matrix(array![[1.0, 2.0]], vec![1]).unwrap();
        assert!(matches!(
            fit_standardizer(&one),
            Err(DatasetError::TooFewSamples { .. })
        ));
        let p = StandardizationParams::identity(3);
        assert!(matches!(
            apply_standardizer(&one, &p),
            Err(DatasetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constructor_invariants() {
        let x = array![[1.0], [2.0]];
        assert!(Dataset::from_matrix(x.clone(), vec![0, 2]).is_err());
        assert!(Dataset::from_matrix(x.clone(), vec![0]).is_err());
        assert!(Dataset::new(x.clone(), vec![0, 1], vec!["a".into(), "a".into()], vec!["1".into(), "2".into()]).is_err());
        assert!(Dataset::new(x.clone(), vec![0, 1], vec!["a".into()], vec!["1".into(), "1".into()]).is_err());
        assert!(Dataset::from_matrix(array![[f64::NAN], [1.0]], vec![0, 1]).is_err());
        let one_class = Dataset::from_matrix(x, vec![1, 1]).unwrap();
        assert!(matches!(
            one_class.require_both_classes(),
            Err(DatasetError::SingleClass)
        ));
    }
}
