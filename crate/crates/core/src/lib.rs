//! Evolution of Markov-Brain animats that learn to cross between two rooms
//! through a narrow gate while sharing the world with clones of themselves.
//!
//! The numeric core (fitness, sweep integration, rank statistics, graph
//! metrics) is generic over the scalar type; see [`num`]. The aliases below
//! fix the types used by the CLI and the evolution loop.

pub mod analysis;
pub mod brain;
pub mod evaluation;
pub mod evolution;
pub mod genome;
pub mod num;
pub mod runner;
pub mod seed;
pub mod world;

pub use num_rational::Rational64;

/// Scalar used for fitness during evolution.
pub type Fitness = f64;
/// Exact fitness; every reward/penalty combination is representable.
pub type ExactFitness = Rational64;

pub type TrialConfig = evaluation::TrialConfig<Fitness>;
pub type ExactTrialConfig = evaluation::TrialConfig<ExactFitness>;
pub type FitnessReport = evaluation::FitnessReport<Fitness>;
pub type ExactFitnessReport = evaluation::FitnessReport<ExactFitness>;
pub type SweepResult = analysis::sweep::SweepResult<Fitness>;
pub type BrainGraphMetrics = analysis::graph::BrainGraphMetrics<Fitness>;
pub type RankTest = analysis::stats::RankTest<Fitness>;

pub use brain::{BrainState, ConnectivityMatrix, DeterministicGate, MarkovBrain, Motors};
pub use evolution::{Condition, EvolutionRecord, GaConfig};
pub use genome::{Genome, MutationParams};
pub use world::{Environment, Heading, Pose};

/// Version string written into every CSV comment line.
pub const TOOL_VERSION: &str = concat!("animat-swarm ", env!("CARGO_PKG_VERSION"));
