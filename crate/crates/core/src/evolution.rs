//! Tournament-selection genetic algorithm over clone swarms.

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::brain::{decode_gates, START_CODON};
use crate::evaluation::{genome_fitness, EvalError, EvalSeeds, FitnessReport, TrialConfig};
use crate::genome::{mutate, new_random_genome, Genome, GenomeError, MutationParams};
use crate::num::{mean, standard_error};
use crate::seed::{self, tag};
use crate::world::{Environment, START_POSITIONS};

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid GA configuration: {0}")]
    Config(String),
    #[error("tournament over an empty population")]
    EmptyPopulation,
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("generation {generation}: {source}")]
    Io { generation: usize, source: io::Error },
}

/// Swarm size used during evolution.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Condition {
    Single,
    Quarter,
    Half,
    ThreeQuarters,
    Full,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Full,
        Condition::ThreeQuarters,
        Condition::Half,
        Condition::Quarter,
        Condition::Single,
    ];

    pub fn swarm_size(self) -> usize {
        match self {
            Condition::Single => 1,
            Condition::Quarter => START_POSITIONS / 4,
            Condition::Half => START_POSITIONS / 2,
            Condition::ThreeQuarters => START_POSITIONS * 3 / 4,
            Condition::Full => START_POSITIONS,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::Single => "G_single",
            Condition::Quarter => "G_0.25",
            Condition::Half => "G_0.50",
            Condition::ThreeQuarters => "G_0.75",
            Condition::Full => "G_1.00",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| format!("unknown condition {s:?} (expected G_single, G_0.25, G_0.50, G_0.75 or G_1.00)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    pub generations: usize,
    pub initial_size: usize,
    /// Start codons written into each generation-0 genome at random sites.
    pub initial_start_codons: usize,
    pub checkpoint_interval: usize,
    /// Seed of this evolution run; every random stream derives from it.
    pub seed: u64,
    pub mutation: MutationParams,
    pub trial: TrialConfig<f64>,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            tournament_size: 5,
            generations: 10_000,
            initial_size: 5_000,
            initial_start_codons: 10,
            checkpoint_interval: 100,
            seed: 0,
            mutation: MutationParams::default(),
            trial: TrialConfig::default(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        if self.population_size == 0 {
            return Err(EvolutionError::Config("population_size must be positive".into()));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return Err(EvolutionError::Config(format!(
                "tournament_size {} not in [1, population_size]",
                self.tournament_size
            )));
        }
        if self.checkpoint_interval == 0 {
            return Err(EvolutionError::Config("checkpoint_interval must be positive".into()));
        }
        if self.trial.swarm_size > START_POSITIONS {
            return Err(EvolutionError::Config(format!(
                "swarm size {} exceeds {START_POSITIONS} start positions",
                self.trial.swarm_size
            )));
        }
        self.mutation.validate()?;
        self.trial.validate()?;
        if self.initial_size < self.mutation.size_min || self.initial_size > self.mutation.size_max {
            return Err(EvolutionError::Config(format!(
                "initial_size {} outside [{}, {}]",
                self.initial_size, self.mutation.size_min, self.mutation.size_max
            )));
        }
        Ok(())
    }

    pub fn is_checkpoint(&self, generation: usize) -> bool {
        generation.is_multiple_of(self.checkpoint_interval) || generation == self.generations
    }
}

/// Draws `k` indices with replacement and returns the fittest; ties go to
/// the earliest draw.
pub fn tournament_select<S: PartialOrd, R: Rng + ?Sized>(
    fitnesses: &[S],
    k: usize,
    rng: &mut R,
) -> Result<usize, EvolutionError> {
    if fitnesses.is_empty() {
        return Err(EvolutionError::EmptyPopulation);
    }
    if k == 0 {
        return Err(EvolutionError::Config("tournament size must be at least 1".into()));
    }
    let n = fitnesses.len();
    let mut best = rng.random_range(0..n);
    for _ in 1..k {
        let c = rng.random_range(0..n);
        if fitnesses[c] > fitnesses[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Offspring population: each child is a mutated copy of a tournament
/// winner. Parents are not carried over.
pub fn next_generation<S: PartialOrd, R: Rng + ?Sized>(
    population: &[Genome],
    fitnesses: &[S],
    params: &MutationParams,
    tournament_size: usize,
    rng: &mut R,
) -> Result<Vec<Genome>, EvolutionError> {
    assert_eq!(population.len(), fitnesses.len(), "one fitness per genome");
    (0..population.len())
        .map(|_| {
            let parent = tournament_select(fitnesses, tournament_size, rng)?;
            Ok(mutate(&population[parent], params, rng))
        })
        .collect()
}

/// Summary statistics of one evaluated generation.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean: f64,
    pub max: f64,
    pub sem: f64,
    pub mean_length: f64,
    pub mean_gates: f64,
}

pub const STATS_CSV_HEADER: &str = "generation,mean_fitness,max_fitness,sem,mean_genome_length,mean_gates";

impl GenerationStats {
    pub fn compute(generation: usize, population: &[Genome], fitness: &[f64]) -> Self {
        let lengths: Vec<f64> = population.iter().map(|g| g.len() as f64).collect();
        let gates: Vec<f64> = population.iter().map(|g| decode_gates(g).len() as f64).collect();
        GenerationStats {
            generation,
            mean: mean(fitness),
            max: fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            sem: standard_error(fitness),
            mean_length: mean(&lengths),
            mean_gates: mean(&gates),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.generation, self.mean, self.max, self.sem, self.mean_length, self.mean_gates
        )
    }
}

/// Receives every evaluated generation, e.g. to persist stats and checkpoints.
pub trait EvolutionObserver {
    fn on_generation(
        &mut self,
        cfg: &GaConfig,
        stats: &GenerationStats,
        population: &[Genome],
        reports: &[FitnessReport<f64>],
    ) -> io::Result<()>;
}

impl EvolutionObserver for () {
    fn on_generation(&mut self, _: &GaConfig, _: &GenerationStats, _: &[Genome], _: &[FitnessReport<f64>]) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionRecord {
    /// Statistics for generations `0..=generations`.
    pub generations: Vec<GenerationStats>,
    pub checkpoints: Vec<usize>,
    pub final_population: Vec<Genome>,
    pub final_fitness: Vec<f64>,
}

/// Evaluates every genome of a generation in parallel.
pub fn evaluate_population(
    population: &[Genome],
    env: &Environment,
    trial: &TrialConfig<f64>,
    seed: u64,
    generation: usize,
) -> Result<Vec<FitnessReport<f64>>, EvalError> {
    population
        .par_iter()
        .enumerate()
        .map(|(i, g)| genome_fitness(g, env, trial, &EvalSeeds::for_genome(seed, generation as u64, i as u64)))
        .collect()
}

/// Generation-0 population.
pub fn initial_population(cfg: &GaConfig) -> Result<Vec<Genome>, EvolutionError> {
    let mut rng = seed::stream(cfg.seed, &[tag::INIT]);
    (0..cfg.population_size)
        .map(|_| {
            let g = new_random_genome(cfg.initial_size, &cfg.mutation, &mut rng)?;
            if cfg.initial_start_codons == 0 {
                return Ok(g);
            }
            let mut sites = g.into_sites();
            let n = sites.len();
            for _ in 0..cfg.initial_start_codons {
                let at = rng.random_range(0..n);
                sites[at] = START_CODON[0];
                sites[(at + 1) % n] = START_CODON[1];
            }
            Ok(Genome::from_sites(sites))
        })
        .collect()
}

pub fn evolve<O: EvolutionObserver + ?Sized>(
    cfg: &GaConfig,
    env: &Environment,
    observer: &mut O,
) -> Result<EvolutionRecord, EvolutionError> {
    cfg.validate()?;
    let population = initial_population(cfg)?;
    evolve_from(cfg, env, 0, population, observer)
}

/// Continues an evolution from the population of `start_generation`.
///
/// All randomness of generation `g` is derived from `(seed, g)`, so resuming
/// from a checkpoint reproduces an uninterrupted run exactly.
pub fn evolve_from<O: EvolutionObserver + ?Sized>(
    cfg: &GaConfig,
    env: &Environment,
    start_generation: usize,
    mut population: Vec<Genome>,
    observer: &mut O,
) -> Result<EvolutionRecord, EvolutionError> {
    cfg.validate()?;
    if population.len() != cfg.population_size {
        return Err(EvolutionError::Config(format!(
            "population has {} genomes, expected {}",
            population.len(),
            cfg.population_size
        )));
    }
    let mut record = EvolutionRecord {
        generations: Vec::with_capacity(cfg.generations + 1 - start_generation.min(cfg.generations)),
        checkpoints: Vec::new(),
        final_population: Vec::new(),
        final_fitness: Vec::new(),
    };
    for generation in start_generation..=cfg.generations {
        let reports = evaluate_population(&population, env, &cfg.trial, cfg.seed, generation)?;
        let fitness: Vec<f64> = reports.iter().map(|r| r.mean).collect();
        let stats = GenerationStats::compute(generation, &population, &fitness);
        observer
            .on_generation(cfg, &stats, &population, &reports)
            .map_err(|source| EvolutionError::Io { generation, source })?;
        if cfg.is_checkpoint(generation) {
            record.checkpoints.push(generation);
        }
        record.generations.push(stats);
        if generation == cfg.generations {
            record.final_fitness = fitness;
            break;
        }
        let mut rng = seed::stream(cfg.seed, &[tag::SELECT, generation as u64]);
        population = next_generation(&population, &fitness, &cfg.mutation, cfg.tournament_size, &mut rng)?;
    }
    record.final_population = population;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_sizes_and_labels() {
        let sizes: Vec<usize> = Condition::ALL.iter().map(|c| c.swarm_size()).collect();
        assert_eq!(sizes, vec![72, 54, 36, 18, 1]);
        for c in Condition::ALL {
            assert_eq!(c.label().parse::<Condition>().unwrap(), c);
        }
        assert!("G_0.3".parse::<Condition>().is_err());
    }

    #[test]
    fn empty_tournament_is_an_error() {
        let mut rng = seed::stream(0, &[]);
        assert!(matches!(
            tournament_select::<f64, _>(&[], 5, &mut rng),
            Err(EvolutionError::EmptyPopulation)
        ));
    }

    #[test]
    fn size_one_tournament_is_uniform() {
        let mut rng = seed::stream(1, &[]);
        let fit = [3.0, 1.0, 2.0, 0.0];
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[tournament_select(&fit, 1, &mut rng).unwrap()] += 1;
        }
        // each ~ Binomial(40000, 1/4), sd ~ 86.6
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 4.0 * 86.6, "{counts:?}");
        }
    }

    #[test]
    fn full_tournament_finds_the_best_eventually() {
        let mut rng = seed::stream(2, &[]);
        let mut fit = vec![0.0; 100];
        fit[99] = 10.0;
        // k = population; the best is drawn with prob 1 - 0.99^100 = 0.634
        let hits = (0..1000).filter(|_| tournament_select(&fit, 100, &mut rng).unwrap() == 99).count();
        assert!(hits > 550 && hits < 720, "{hits}");
        // with a single genome the tournament always returns it
        assert_eq!(tournament_select(&[10.0], 5, &mut rng).unwrap(), 0);
    }

    #[test]
    fn ties_go_to_first_draw() {
        // all equal: the winner is the first drawn index, i.e. uniform
        let mut a = seed::stream(5, &[]);
        let mut b = seed::stream(5, &[]);
        for _ in 0..100 {
            let w = tournament_select(&[1.0; 10], 5, &mut a).unwrap();
            let first = b.random_range(0..10usize);
            for _ in 1..5 {
                b.random_range(0..10usize);
            }
            assert_eq!(w, first);
        }
    }

    #[test]
    fn selection_only_generation_is_a_multiset_of_parents() {
        let mut rng = seed::stream(3, &[]);
        let pop: Vec<Genome> = (0..20u8).map(|i| Genome::from_sites(vec![i; 2000])).collect();
        let fit: Vec<f64> = (0..20).map(f64::from).collect();
        let next = next_generation(&pop, &fit, &MutationParams::none(), 5, &mut rng).unwrap();
        assert_eq!(next.len(), 20);
        assert!(next.iter().all(|g| pop.contains(g)));
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let c = GaConfig { tournament_size: 101, ..Default::default() };
        assert!(c.validate().is_err());
        let c = GaConfig { initial_size: 100, ..Default::default() };
        assert!(c.validate().is_err());
        let mut c = GaConfig::default();
        c.trial.swarm_size = 73;
        assert!(c.validate().is_err());
    }

    #[test]
    fn start_codon_seeding() {
        let cfg = GaConfig { population_size: 4, initial_start_codons: 10, ..Default::default() };
        for g in initial_population(&cfg).unwrap() {
            assert!(decode_gates(&g).len() >= 8);
        }
    }
}
