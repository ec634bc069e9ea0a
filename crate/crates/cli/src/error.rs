use std::path::PathBuf;

use sparsebench::dataset::DatasetError;
use sparsebench::evaluation::EvalError;
use sparsebench::features::FeatureError;
use sparsebench::solvers::SolverError;
use sparsebench::synthgen::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}:{line}:{column}: {message}", path.display())]
    ConfigSyntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Run(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration problems, 3 for data problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigSyntax { .. } | CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io { .. } | CliError::Run(_) => 1,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Config(_) => CliError::Config(e.to_string()),
            SolverError::Dataset(_) | SolverError::FeatureMismatch(_) | SolverError::InitialWeights { .. } => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidPlan(_) | EvalError::UnknownClassifier(_) => CliError::Config(e.to_string()),
            EvalError::Solver(s) => s.into(),
            EvalError::ClassTooSmall { .. }
            | EvalError::TooFewForFolds { .. }
            | EvalError::UnknownFeature(_)
            | EvalError::Dataset(_) => CliError::Data(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Eval(inner) => inner.into(),
            _ => CliError::Run(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) => CliError::Config(e.to_string()),
            _ => CliError::Run(e.to_string()),
        }
    }
}
