//! Local staged pipeline: stage directories with hashed manifests, a small
//! filter-query language over stage tables, a self-contained HTML report,
//! and a synthetic flow generator for offline runs.
//!
//! Stage layout: `<root>/{raw,curated,models,results,report}`, each with a
//! `manifest.json` recording SHA-256, size, producing step and config hash
//! of every artifact.

mod config;
mod query;
mod report;
mod run;
mod synth;
mod workspace;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::eda::EdaError;
use crate::flowdata::FlowDataError;
use crate::learners::LearnError;
use crate::metrics::MetricsError;
use crate::sampling::SamplingError;

pub use config::{EdaSettings, RunConfig, SelectionSettings, SmoteSettings, SplitSettings};
pub use query::{
    eval_query, filter_rows, parse_query, CmpOp, Literal, QueryExpr, QueryResult, SyntaxError,
};
pub use report::{emit_report, render_report, REPORT_FILE};
pub use run::{class_names, derived_seeds, run_pipeline, EdaArtifacts, RunOptions, RunSummary, SUMMARY_FILE};
pub use synth::{class_counts, generate_synthetic, write_synthetic};
pub use workspace::{
    init_workspace, sha256_file, sha256_hex, ManifestEntry, Stage, StageManifest, Workspace, WorkspaceLock,
    LOCK_FILE, MANIFEST_FILE,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("permission denied for {path}: {reason}")]
    PermissionDenied { path: PathBuf, reason: String },
    #[error("{0} is not an initialized workspace")]
    NotAWorkspace(PathBuf),
    #[error("workspace is locked by another run ({0})")]
    Locked(PathBuf),
    #[error("unknown stage `{0}`")]
    UnknownStage(String),
    #[error("{stage} manifest: {message}")]
    Manifest { stage: Stage, message: String },
    #[error("`{file}` is not listed in the {stage} manifest")]
    NotInManifest { stage: Stage, file: String },
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("no models enabled")]
    NoModelsEnabled,
    #[error("missing results: {0}")]
    MissingResults(String),
    #[error("step `{step}` failed: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("type mismatch: column `{column}` cannot be compared with {literal}")]
    TypeMismatch { column: String, literal: String },
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
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Name of the failing step, if the error came from a pipeline run.
    pub fn step(&self) -> Option<&'static str> {
        match self {
            PipelineError::Step { step, .. } => Some(step),
            _ => None,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
