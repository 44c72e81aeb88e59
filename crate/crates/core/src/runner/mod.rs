//! Command-line orchestration: configuration, run directories and the
//! `evolve`, `sweep`, `analyze` and `trial` commands.

mod analyze;
pub mod config;
mod evolve;
mod files;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use analyze::{cli_analyze, AnalyzeMode, AnalyzeOptions, StateGrid};
pub use config::{ExperimentConfig, MapSource};
pub use evolve::{cli_evolve, replicate_dir, replicate_seed, ReplicateSummary};
pub use files::{cli_sweep, cli_trial, load_genome_file};

use crate::analysis::AnalysisError;
use crate::evaluation::EvalError;
use crate::evolution::EvolutionError;
use crate::genome::GenomeError;
use crate::world::MapError;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for key {key:?}: {message}")]
    InvalidValue { key: String, value: String, message: String },
    #[error("config line {line}: expected key = value, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("map {}: {source}", path.display())]
    Map { path: PathBuf, source: MapError },
    #[error("refusing to resume {}: configuration differs in {}", path.display(), keys.join(", "))]
    SnapshotMismatch { path: PathBuf, keys: Vec<String> },
    #[error("{} is missing expected files: {}", dir.display(), missing.join(", "))]
    MissingArtifacts { dir: PathBuf, missing: Vec<String> },
    #[error("genome file {}: {source}", path.display())]
    GenomeFile { path: PathBuf, source: GenomeError },
    #[error("genome index {index} out of range for {len} genomes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl RunnerError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        RunnerError::Io { path: path.to_path_buf(), source }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T, RunnerError>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunnerError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
