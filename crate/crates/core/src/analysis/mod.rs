//! Post-hoc analyses of evolved genomes: generalizability sweeps, behaviour
//! statistics, brain-graph metrics and nonparametric tests.

pub mod behavior;
pub mod graph;
pub mod stats;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("log recorded in environment {found:016x}, expected {expected:016x}")]
    MixedEnvironments { expected: u64, found: u64 },
    #[error("wall and animat sensed at the same time")]
    InvalidSensors,
    #[error("no animat-steps to analyse")]
    EmptyLogs,
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
}
