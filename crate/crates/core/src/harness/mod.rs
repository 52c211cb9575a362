//! Run orchestration: evaluation runs, prompt-synthesis runs with ablations,
//! cross-dataset transfer, and comparison reports over persisted runs.

mod config;
mod eval;
mod report;
mod run;
mod transfer;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::{DatasetSource, PromptMode, RunConfig, SourceFormat};
pub use eval::{evaluate, prime, render_query, Evaluation};
pub use report::{load_run, report, ComparisonTable, LoadedRun, TableCell, TableColumn, TableRow};
pub use run::{load_corpus, run_drgap, run_eval, CandidateRow, DatasetEntry, RunManifest};
pub use transfer::{run_transfer_matrix, TransferMatrix};

use crate::baselines::BaselineError;
use crate::corpus::{CorpusError, DatasetId};
use crate::gateway::GatewayError;
use crate::metrics::MetricError;
use crate::pipeline::PipelineError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("provider failure{}: {source}", .example_id.as_deref().map(|i| format!(" on `{i}`")).unwrap_or_default())]
    Provider {
        example_id: Option<String>,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no baseline bias for target dataset `{0}`")]
    MissingBaseline(DatasetId),
    #[error("runs are not comparable: {0}")]
    IncomparableRuns(String),
    #[error("malformed run artifact {path}: {reason}")]
    BadArtifact { path: PathBuf, reason: String },
}

impl From<GatewayError> for HarnessError {
    fn from(source: GatewayError) -> Self {
        HarnessError::Provider {
            example_id: None,
            source,
        }
    }
}

impl From<PipelineError> for HarnessError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Gateway(source) => HarnessError::Provider {
                example_id: None,
                source,
            },
            other => HarnessError::Pipeline(other),
        }
    }
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 provider, 4 validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } | HarnessError::Baseline(_) => 2,
            HarnessError::Provider { .. } => 3,
            HarnessError::Corpus(CorpusError::IoFailure { .. }) => 2,
            _ => 4,
        }
    }
}

/// Writes `bytes` to `path` via a sibling temp file and rename.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut bytes = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut bytes, row).expect("row serializes");
        bytes.push(b'\n');
    }
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_failure_class() {
        assert_eq!(HarnessError::Config("x".into()).exit_code(), 2);
        assert_eq!(HarnessError::from(GatewayError::Timeout).exit_code(), 3);
        assert_eq!(HarnessError::from(PipelineError::Gateway(GatewayError::Timeout)).exit_code(), 3);
        assert_eq!(HarnessError::from(PipelineError::NoCandidates).exit_code(), 4);
        assert_eq!(HarnessError::Corpus(CorpusError::EmptyCorpus).exit_code(), 4);
    }

    #[test]
    fn provider_error_names_the_example() {
        let e = HarnessError::Provider {
            example_id: Some("wb/1".into()),
            source: GatewayError::Timeout,
        };
        assert_eq!(e.to_string(), "provider failure on `wb/1`: request timed out");
    }
}
