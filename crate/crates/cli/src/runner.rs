//! The `run` pipeline: protocol runs for every (modality, classifier) cell,
//! then rankings, curves, group statistics and the manifest.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use sparsebench::dataset::ModalitySpec;
use sparsebench::evaluation::{
    self, compare_groups, write_results_csv, Classifier, EvalError, EvalReport, GroupTest, ProtocolRun,
};
use sparsebench::features::{accuracy_vs_k_per_repetition, rank_each, rank_features, AccuracyCurve, FeatureRanking};

use crate::config::{DataSource, Experiment, ExperimentConfig};
use crate::error::{CliError, Result};

pub const MANIFEST_SCHEMA: &str = "sparsebench-manifest/1";

/// One (modality, classifier) cell.
pub struct CellRun {
    pub modality: String,
    pub classifier: Classifier,
    pub run: ProtocolRun,
    /// L1 classifiers only.
    pub ranking: Option<FeatureRanking>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupStatRow {
    pub feature: String,
    pub test: &'static str,
    pub n_0: usize,
    pub n_1: usize,
    pub mean_0: f64,
    pub mean_1: f64,
    /// `None` when the statistic is undefined for this feature.
    pub statistic: Option<f64>,
    pub degrees_of_freedom: Option<f64>,
    pub p_value: Option<f64>,
}

pub struct RunOutcome {
    pub cells: Vec<CellRun>,
    pub curves: Vec<AccuracyCurve>,
    pub group_stats: Vec<GroupStatRow>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn reports(&self) -> Vec<EvalReport> {
        self.cells.iter().map(|c| c.run.report.clone()).collect()
    }
}

/// Runs every configured computation; nothing is written.
pub fn execute(exp: &Experiment) -> Result<RunOutcome> {
    let cfg = &exp.config;
    let cells: Vec<(&ModalitySpec, Classifier)> = exp
        .modalities
        .iter()
        .flat_map(|m| cfg.classifiers.iter().map(move |&c| (m, c)))
        .collect();
    let cells = cells
        .into_par_iter()
        .map(|(m, c)| -> Result<CellRun> {
            let start = Instant::now();
            let run = evaluation::run_protocol_detailed(
                &exp.data,
                m,
                c,
                &cfg.split,
                &cfg.cv,
                &cfg.solver,
                &|_, _, _| {},
            )?;
            info!(
                "{} {}: accuracy {:.3} ({:.1}s)",
                m.name,
                c,
                run.report.accuracy.mean,
                start.elapsed().as_secs_f64()
            );
            let ranking = if c.is_l1() { Some(rank_features(&run.models)?) } else { None };
            Ok(CellRun {
                modality: m.name.clone(),
                classifier: c,
                run,
                ranking,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    for cell in &cells {
        let r = &cell.run.report;
        if r.nonconverged_fits > 0 {
            let msg = format!(
                "{} {}: {} of {} final fits did not converge",
                cell.modality,
                cell.classifier,
                r.nonconverged_fits,
                r.repetitions.len()
            );
            warn!("{msg}");
            warnings.push(msg);
        }
        let uncertified = r
            .repetitions
            .iter()
            .filter(|rep| cell.classifier.is_l1() && rep.kkt_violation > sparsebench::solvers::KKT_TOLERANCE)
            .count();
        if uncertified > 0 {
            let msg = format!(
                "{} {}: {uncertified} final fits failed the optimality certificate",
                cell.modality, cell.classifier
            );
            warn!("{msg}");
            warnings.push(msg);
        }
    }

    let curves = match &cfg.curves {
        None => Vec::new(),
        Some(curve_cfg) => {
            let scope: Option<HashSet<&str>> =
                curve_cfg.modalities.as_ref().map(|v| v.iter().map(String::as_str).collect());
            let jobs: Vec<(&CellRun, Classifier)> = cells
                .iter()
                .filter(|c| c.ranking.is_some())
                .filter(|c| scope.as_ref().is_none_or(|s| s.contains(c.modality.as_str())))
                .map(|c| (c, c.classifier.plain()))
                .collect();
            jobs.into_par_iter()
                .map(|(cell, plain)| -> Result<AccuracyCurve> {
                    // Per-repetition rankings: the pooled one has seen every test part.
                    let rankings = rank_each(&cell.run.models)?;
                    let k_max = curve_cfg.k_max.min(rankings[0].len());
                    Ok(accuracy_vs_k_per_repetition(
                        &exp.data,
                        &cell.modality,
                        &rankings,
                        plain,
                        &cfg.split,
                        &cfg.solver,
                        k_max,
                    )?)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    for curve in &curves {
        let stalled: usize = curve.points.iter().map(|p| p.nonconverged_fits).sum();
        if stalled > 0 {
            warnings.push(format!(
                "{} {} curve: {stalled} final fits did not converge",
                curve.modality, curve.classifier
            ));
        }
    }

    let group_stats = match &cfg.group_stats {
        None => Vec::new(),
        Some(gs) => {
            let features = match &gs.features {
                Some(f) => f.clone(),
                None => {
                    let mut seen = HashSet::new();
                    exp.modalities
                        .iter()
                        .flat_map(|m| m.selected_features.iter())
                        .filter(|f| seen.insert(f.as_str()))
                        .cloned()
                        .collect()
                }
            };
            features
                .iter()
                .map(|f| group_stat(exp, f, gs.chi_square_max_levels))
                .collect::<Result<Vec<_>>>()?
        }
    };

    Ok(RunOutcome {
        cells,
        curves,
        group_stats,
        warnings,
    })
}

fn group_stat(exp: &Experiment, feature: &str, max_levels: usize) -> Result<GroupStatRow> {
    let d = &exp.data;
    let j = d
        .feature_index(feature)
        .ok_or_else(|| CliError::Data(format!("group_stats: unknown feature `{feature}`")))?;
    let column = d.features().column(j);
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    let mut levels: Vec<f64> = column.to_vec();
    for (&v, &y) in column.iter().zip(d.labels()) {
        sums[usize::from(y)] += v;
        counts[usize::from(y)] += 1;
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let test = if levels.len() <= max_levels {
        GroupTest::ChiSquare { max_levels }
    } else {
        GroupTest::WelchT
    };
    let (statistic, degrees_of_freedom, p_value) = match compare_groups(d, feature, test) {
        Ok(r) => (Some(r.statistic), Some(r.degrees_of_freedom), Some(r.p_value)),
        Err(EvalError::UndefinedStatistic(why)) => {
            warn!("group_stats: {feature}: {why}");
            (None, None, None)
        }
        Err(e) => return Err(e.into()),
    };
    Ok(GroupStatRow {
        feature: feature.to_string(),
        test: match test {
            GroupTest::WelchT => "welch_t",
            GroupTest::ChiSquare { .. } => "chi_square",
        },
        n_0: counts[0],
        n_1: counts[1],
        mean_0: sums[0] / counts[0].max(1) as f64,
        mean_1: sums[1] / counts[1].max(1) as f64,
        statistic,
        degrees_of_freedom,
        p_value,
    })
}

/// Characters other than ASCII alphanumerics, `-` and `_` become `_`.
pub fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

struct ArtifactWriter {
    root: PathBuf,
    written: Vec<ArtifactEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl ArtifactWriter {
    fn write(&mut self, rel: &str, bytes: Vec<u8>) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(format!("creating {}", parent.display()), e))?;
        }
        fs::write(&path, &bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.written.push(ArtifactEntry {
            path: rel.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_buf<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::io("formatting artifact", e))?;
    Ok(buf)
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    versions: Versions,
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<&'a str>,
    config: &'a ExperimentConfig,
    seeds: Seeds,
    data: DataSummary,
    modalities: Vec<ModalitySummary<'a>>,
    warnings: &'a [String],
    artifacts: &'a [ArtifactEntry],
}

#[derive(Serialize)]
struct Versions {
    sparsebench: &'static str,
    #[serde(rename = "sparsebench-cli")]
    cli: &'static str,
}

#[derive(Serialize)]
struct Seeds {
    split: u64,
    cv: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    synthetic_data: Option<u64>,
}

#[derive(Serialize)]
struct DataSummary {
    samples: usize,
    features: usize,
    positives: usize,
    negatives: usize,
}

#[derive(Serialize)]
struct ModalitySummary<'a> {
    name: &'a str,
    features: &'a [String],
}

/// Writes every artifact of `outcome` below `out` and returns the manifest
/// entries, manifest excluded.
pub fn write_artifacts(exp: &Experiment, outcome: &RunOutcome, out: &Path) -> Result<Vec<ArtifactEntry>> {
    let cfg = &exp.config;
    let mut w = ArtifactWriter {
        root: out.to_path_buf(),
        written: Vec::new(),
    };
    let reports = outcome.reports();

    let mut buf = Vec::new();
    write_results_csv(&reports, &mut buf)?;
    w.write("results.csv", buf)?;
    let mut json = serde_json::to_vec_pretty(&reports).map_err(|e| CliError::Run(e.to_string()))?;
    json.push(b'\n');
    w.write("results.json", json)?;

    let ranked: Vec<&CellRun> = outcome.cells.iter().filter(|c| c.ranking.is_some()).collect();
    if !ranked.is_empty() {
        let bytes = io_buf(|b| {
            writeln!(b, "modality,classifier,rank,feature,mean_weight,mean_abs_weight,selection_frequency")?;
            for cell in &ranked {
                let ranking = cell.ranking.as_ref().expect("filtered on ranking");
                for (r, e) in ranking.entries.iter().take(cfg.top_features).enumerate() {
                    writeln!(
                        b,
                        "{},{},{},{},{},{},{}",
                        cell.modality,
                        cell.classifier.id(),
                        r + 1,
                        e.name,
                        e.mean_weight,
                        e.mean_abs_weight,
                        e.selection_frequency
                    )?;
                }
            }
            Ok(())
        })?;
        w.write("top_features.csv", bytes)?;
    }

    for cell in &ranked {
        let stem = format!("{}_{}", file_stem(&cell.modality), cell.classifier.name());
        let bytes = io_buf(|b| {
            let folds = cfg.cv.folds;
            write!(b, "repetition,lambda,cv_accuracy,selected")?;
            for f in 0..folds {
                write!(b, ",fold_{f}")?;
            }
            writeln!(b)?;
            for (rep, table) in cell.run.cv_tables.iter().enumerate() {
                for (l, lambda) in table.lambdas.iter().enumerate() {
                    write!(
                        b,
                        "{rep},{lambda:e},{},{}",
                        table.mean_accuracies[l],
                        u8::from(*lambda == table.best_lambda)
                    )?;
                    for a in &table.fold_accuracies[l] {
                        write!(b, ",{a}")?;
                    }
                    writeln!(b)?;
                }
            }
            Ok(())
        })?;
        w.write(&format!("cv_tables/{stem}.csv"), bytes)?;
    }

    for curve in &outcome.curves {
        let stem = format!("{}_{}", file_stem(&curve.modality), curve.classifier.name());
        let mut csv = Vec::new();
        curve.write_csv(&mut csv)?;
        w.write(&format!("curves/{stem}.csv"), csv)?;
        let mut dat = Vec::new();
        curve.write_gnuplot(&mut dat)?;
        w.write(&format!("curves/{stem}.dat"), dat)?;
    }

    if cfg.group_stats.is_some() {
        let bytes = io_buf(|b| {
            writeln!(b, "feature,test,n_0,n_1,mean_0,mean_1,statistic,df,p_value")?;
            for r in &outcome.group_stats {
                writeln!(
                    b,
                    "{},{},{},{},{},{},{},{},{}",
                    r.feature,
                    r.test,
                    r.n_0,
                    r.n_1,
                    r.mean_0,
                    r.mean_1,
                    opt(r.statistic),
                    opt(r.degrees_of_freedom),
                    opt(r.p_value)
                )?;
            }
            Ok(())
        })?;
        w.write("group_stats.csv", bytes)?;
    }
    Ok(w.written)
}

/// `manifest.json`: configuration echo, seeds, versions and artifact hashes.
pub fn write_manifest(exp: &Experiment, outcome: &RunOutcome, artifacts: &[ArtifactEntry], out: &Path) -> Result<()> {
    let cfg = &exp.config;
    let (positives, negatives) = {
        let (neg, pos) = exp.data.class_counts();
        (pos, neg)
    };
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        versions: Versions {
            sparsebench: sparsebench::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        group: cfg.group.as_deref(),
        config: cfg,
        seeds: Seeds {
            split: cfg.split.seed,
            cv: cfg.cv.seed,
            synthetic_data: match &cfg.data {
                DataSource::Synthetic(s) => Some(s.seed),
                DataSource::Csv(_) => None,
            },
        },
        data: DataSummary {
            samples: exp.data.n_samples(),
            features: exp.data.n_features(),
            positives,
            negatives,
        },
        modalities: exp
            .modalities
            .iter()
            .map(|m| ModalitySummary {
                name: &m.name,
                features: &m.selected_features,
            })
            .collect(),
        warnings: &outcome.warnings,
        artifacts,
    };
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Run(e.to_string()))?;
    json.push(b'\n');
    let path = out.join("manifest.json");
    fs::write(&path, json).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Runs the experiment and writes all artifacts into the config's output
/// directory.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutcome> {
    let out = exp.config.output.clone();
    let outcome = execute(exp)?;
    let artifacts = write_artifacts(exp, &outcome, &out)?;
    write_manifest(exp, &outcome, &artifacts, &out)?;
    info!("wrote {} artifacts to {}", artifacts.len() + 1, out.display());
    Ok(outcome)
}
