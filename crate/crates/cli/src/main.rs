use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use sparsebench::dataset::{self, CsvLayout, Dataset, ModalitySpec};
use sparsebench::evaluation::{select_lambda, CVPlan, Classifier, DEFAULT_LAMBDA_GRID};
use sparsebench::solvers::{self, LinearModel};
use sparsebench::synthgen::{self, NoiseModel, SyntheticSpec};
use sparsebench::{ObjectiveSpec, SolverConfig};
use sparsebench_cli::config::{Experiment, ExperimentConfig};
use sparsebench_cli::error::{CliError, Result};
use sparsebench_cli::runner;

#[derive(Parser)]
#[command(name = "sparsebench", version, about = "Sparse linear classifiers for small-n, large-p data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides the split and CV seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config and its data without fitting anything.
    Validate { config: PathBuf },
    /// Fit one classifier on a whole CSV and save the model.
    Fit(FitArgs),
    /// Score a CSV with a saved model.
    Predict(PredictArgs),
    /// Draw a synthetic dataset with a known sparse truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// 1 LR, 2 LR-L1, 3 SVM, 4 SVM-L1.
    #[arg(long)]
    classifier: u8,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long, default_value = "id")]
    id_column: String,
    /// Fixed penalty for L1 classifiers; chosen by CV when absent.
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated feature names; all features when absent.
    #[arg(long, value_delimiter = ',', conflicts_with = "feature_list")]
    features: Option<Vec<String>>,
    /// File with one feature name per line.
    #[arg(long)]
    feature_list: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    cv_seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "id")]
    id_column: String,
    /// Column to ignore, such as the label of a held-out file.
    #[arg(long)]
    label_column: Option<String>,
    /// `-` writes to stdout.
    #[arg(long, short, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON spec file; the remaining spec flags are ignored when given.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    samples: usize,
    #[arg(long, default_value_t = 500)]
    features: usize,
    /// `index:weight` pairs, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0:2,1:-2,2:1.5")]
    support: Vec<String>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    intercept: f64,
    /// `logistic` or `margin:<flip probability>`.
    #[arg(long, default_value = "logistic")]
    noise: String,
    #[arg(long, default_value_t = 0.0)]
    correlation: f64,
    #[arg(long, default_value_t = 10)]
    block_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
    /// Ground-truth JSON; defaults to `<output>.truth.json`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPARSEBENCH_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            jobs,
            seed,
            output,
        } => run(&config, jobs, seed, output),
        Command::Validate { config } => validate(&config),
        Command::Fit(args) => fit(args),
        Command::Predict(args) => predict(args),
        Command::Synth(args) => synth(args),
    }
}

fn prepare(path: &Path, seed: Option<u64>, output: Option<PathBuf>) -> Result<Experiment> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut config = ExperimentConfig::load(path)?.resolve(base);
    if let Some(s) = seed {
        config.set_seed(s);
    }
    if let Some(o) = output {
        config.output = o;
    }
    config.validate()?;
    Experiment::prepare(config)
}

fn run(path: &Path, jobs: Option<usize>, seed: Option<u64>, output: Option<PathBuf>) -> Result<()> {
    let exp = prepare(path, seed, output)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Run(e.to_string()))?;
    let outcome = pool.install(|| runner::run_experiment(&exp))?;
    for report in outcome.reports() {
        eprintln!(
            "{:<12} {:<7} accuracy {:.3} ± {:.3}",
            report.modality, report.classifier, report.accuracy.mean, report.accuracy.sd
        );
    }
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let exp = prepare(path, None, None)?;
    let (neg, pos) = exp.data.class_counts();
    eprintln!(
        "{} samples ({pos} positive, {neg} negative), {} features",
        exp.data.n_samples(),
        exp.data.n_features()
    );
    for m in &exp.modalities {
        eprintln!("  {:<12} {} features", m.name, m.len());
    }
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let classifier = Classifier::from_id(args.classifier)?;
    let all = dataset::load_csv(&args.data, &args.label_column, &args.id_column)?;
    let names = match (args.features, args.feature_list) {
        (Some(f), _) => f,
        (None, Some(path)) => ModalitySpec::from_list_file("fit", &path)?.selected_features,
        (None, None) => all.feature_names().to_vec(),
    };
    let d = dataset::assemble_modality(&all, &ModalitySpec::new("fit", names)?)?;
    let cfg = SolverConfig::default();
    let kind = classifier.objective_kind();
    let lambda = match (classifier.is_l1(), args.lambda) {
        (false, Some(_)) => {
            return Err(CliError::Config(format!("{classifier} takes no --lambda")));
        }
        (false, None) => 0.0,
        (true, Some(l)) => l,
        (true, None) => {
            let plan = CVPlan {
                folds: args.folds,
                lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
                seed: args.cv_seed,
            };
            let table = select_lambda(&d, kind, &plan, &cfg)?;
            info!("cross-validated lambda {}", table.best_lambda);
            table.best_lambda
        }
    };
    let obj = ObjectiveSpec::new(kind, lambda).map_err(|e| CliError::Config(e.to_string()))?;
    let model = solvers::fit(&d, &obj, &cfg)?;
    if !model.diagnostics.converged {
        warn!("solver stopped before convergence");
    }
    model.save(&args.output)?;
    info!(
        "{classifier}: {} of {} weights nonzero, training accuracy {:.3}",
        model.nonzero_count(),
        model.feature_names.len(),
        model.diagnostics.training_accuracy
    );
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let model = LinearModel::load(&args.model)?;
    let layout = match &args.label_column {
        Some(l) => CsvLayout::new(l.clone(), args.id_column.clone()),
        None => CsvLayout::unlabeled(args.id_column.clone()),
    };
    let d: Dataset = dataset::load_csv_with(&args.data, &layout)?;
    let decisions = solvers::decision_values(&model, &d)?;
    let probabilities = solvers::probabilities(&model, &d)?;
    let labels = solvers::labels_from_decisions(&decisions);

    let mut text = String::from("id,decision_value");
    if probabilities.is_some() {
        text.push_str(",probability");
    }
    text.push_str(",predicted_label\n");
    for (i, id) in d.sample_ids().iter().enumerate() {
        text.push_str(&format!("{id},{}", decisions[i]));
        if let Some(p) = &probabilities {
            text.push_str(&format!(",{}", p[i]));
        }
        text.push_str(&format!(",{}\n", labels[i]));
    }
    if args.output == "-" {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("writing stdout", e))
    } else {
        std::fs::write(&args.output, text).map_err(|e| CliError::io(format!("writing {}", args.output), e))
    }
}

fn parse_noise(s: &str) -> Result<NoiseModel> {
    match s.split_once(':') {
        None if s == "logistic" => Ok(NoiseModel::Logistic),
        Some(("margin", p)) => p
            .parse()
            .map(|flip_probability| NoiseModel::Margin { flip_probability })
            .map_err(|_| CliError::Config(format!("bad flip probability `{p}`"))),
        _ => Err(CliError::Config(format!("unknown noise model `{s}`"))),
    }
}

fn parse_support(pairs: &[String]) -> Result<Vec<(usize, f64)>> {
    pairs
        .iter()
        .map(|p| {
            let bad = || CliError::Config(format!("support entry `{p}` is not index:weight"));
            let (j, w) = p.split_once(':').ok_or_else(bad)?;
            Ok((j.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec: SyntheticSpec = match &args.spec {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
            serde_json::from_str(&text).map_err(|e| CliError::ConfigSyntax {
                path: path.clone(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        None => SyntheticSpec {
            intercept: args.intercept,
            feature_correlation: args.correlation,
            block_size: args.block_size,
            ..SyntheticSpec::new(
                args.samples,
                args.features,
                parse_support(&args.support)?,
                parse_noise(&args.noise)?,
                args.seed,
            )
        },
    };
    let (d, truth) = synthgen::generate(&spec)?;
    let truth_path = args.truth.unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".truth.json");
        PathBuf::from(p)
    });
    synthgen::persist(&d, &truth, &args.output, &truth_path)?;
    info!(
        "{} samples × {} features, Bayes accuracy {:.3}",
        d.n_samples(),
        d.n_features(),
        truth.bayes_accuracy
    );
    Ok(())
}
