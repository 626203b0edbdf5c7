use std::path::PathBuf;

use flowguard_core::eda::EdaError;
use flowguard_core::flowdata::FlowDataError;
use flowguard_core::learners::LearnError;
use flowguard_core::metrics::MetricsError;
use flowguard_core::pipeline::{PipelineError, SyntaxError};
use flowguard_core::sampling::SamplingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{source}")]
    Query { text: String, source: SyntaxError },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Data(#[from] FlowDataError),
    #[error(transparent)]
    Eda(#[from] EdaError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Query { .. } => "syntax",
            CliError::Io { .. } => "io",
            CliError::Pipeline(_) => "pipeline",
            CliError::Data(_) => "data",
            CliError::Eda(_) => "eda",
            CliError::Sampling(_) => "sampling",
            CliError::Learn(_) => "model",
            CliError::Metrics(_) => "metrics",
        }
    }

    pub fn step(&self) -> Option<&'static str> {
        match self {
            CliError::Pipeline(e) => e.step(),
            _ => None,
        }
    }

    /// Message for stderr, with the caret line for query syntax errors.
    pub fn detail(&self) -> String {
        match self {
            CliError::Query { text, source } => format!("{source}\n{}", source.caret(text)),
            _ => self.to_string(),
        }
    }
}
