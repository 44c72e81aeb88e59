use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, MapSource, SNAPSHOT_FILE};
use super::RunnerError;
use crate::brain::decode_gates;
use crate::evaluation::FitnessReport;
use crate::evolution::{evolve, evolve_from, EvolutionObserver, GaConfig, GenerationStats, STATS_CSV_HEADER};
use crate::genome::{read_population, write_population, Genome};
use crate::seed::{self, tag};
use crate::world::Environment;
use crate::TOOL_VERSION;

pub const STATS_FILE: &str = "stats.csv";
pub const FINAL_POPULATION_FILE: &str = "final_population.hex";
pub const FINAL_FITNESS_FILE: &str = "final_fitness.csv";
pub const FINAL_FITNESS_HEADER: &str = "genome_id,fitness,length,gates";
pub const MAP_COPY_FILE: &str = "map.txt";

pub fn replicate_seed(master: u64, replicate: usize) -> u64 {
    seed::derive(master, &[tag::REPLICATE, replicate as u64])
}

pub fn replicate_dir(run: &Path, replicate: usize) -> PathBuf {
    run.join(format!("replicate_{replicate:02}"))
}

pub fn checkpoint_name(generation: usize) -> String {
    format!("checkpoint_{generation:06}.hex")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateSummary {
    pub index: usize,
    pub seed: u64,
    pub dir: PathBuf,
    /// Mean fitness of the final generation.
    pub final_mean: f64,
    /// Generation the run started or resumed from; `None` if it was already
    /// complete.
    pub started_at: Option<usize>,
}

/// Writes the file through a temporary name so that a present file is a
/// complete one.
fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), RunnerError> {
    let tmp = path.with_extension("tmp");
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| RunnerError::io(path, e))
}

struct RunWriter {
    dir: PathBuf,
    stats: BufWriter<File>,
}

impl EvolutionObserver for RunWriter {
    fn on_generation(
        &mut self,
        cfg: &GaConfig,
        stats: &GenerationStats,
        population: &[Genome],
        reports: &[FitnessReport<f64>],
    ) -> io::Result<()> {
        writeln!(self.stats, "{}", stats.csv_row())?;
        self.stats.flush()?;
        let g = stats.generation;
        let err = |e: RunnerError| io::Error::other(e.to_string());
        if cfg.is_checkpoint(g) {
            write_atomic(&self.dir.join(checkpoint_name(g)), |w| write_population(w, population)).map_err(err)?;
        }
        if g == cfg.generations {
            write_atomic(&self.dir.join(FINAL_FITNESS_FILE), |w| {
                writeln!(w, "# {TOOL_VERSION} seed={} generation={g}", cfg.seed)?;
                writeln!(w, "{FINAL_FITNESS_HEADER}")?;
                for (i, (genome, r)) in population.iter().zip(reports).enumerate() {
                    writeln!(w, "{i},{},{},{}", r.mean, genome.len(), decode_gates(genome).len())?;
                }
                Ok(())
            })
            .map_err(err)?;
            write_atomic(&self.dir.join(FINAL_POPULATION_FILE), |w| write_population(w, population)).map_err(err)?;
        }
        Ok(())
    }
}

fn stats_comment(ga: &GaConfig, replicate: usize, cfg: &ExperimentConfig) -> String {
    format!("# {TOOL_VERSION} seed={} master_seed={} replicate={replicate} condition={}", ga.seed, cfg.seed, cfg.condition)
}

/// Latest checkpoint generation in `dir`, if any.
fn latest_checkpoint(dir: &Path) -> Result<Option<usize>, RunnerError> {
    let mut best = None;
    for entry in fs::read_dir(dir).map_err(|e| RunnerError::io(dir, e))? {
        let name = entry.map_err(|e| RunnerError::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        if let Some(g) = name.strip_prefix("checkpoint_").and_then(|s| s.strip_suffix(".hex")) {
            if let Ok(g) = g.parse::<usize>() {
                best = best.max(Some(g));
            }
        }
    }
    Ok(best)
}

/// Keeps the comment, header and the rows of generations before `generation`.
fn truncate_stats(path: &Path, generation: usize) -> Result<(), RunnerError> {
    let text = fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
    let kept: String = text
        .lines()
        .filter(|l| {
            l.starts_with('#')
                || *l == STATS_CSV_HEADER
                || l.split(',').next().and_then(|g| g.parse::<usize>().ok()).is_some_and(|g| g < generation)
        })
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(path, kept).map_err(|e| RunnerError::io(path, e))
}

fn final_mean(dir: &Path) -> Result<f64, RunnerError> {
    let fitness = super::files::read_final_fitness(&dir.join(FINAL_FITNESS_FILE))?;
    Ok(crate::num::mean(&fitness))
}

fn run_replicate(cfg: &ExperimentConfig, env: &Environment, index: usize) -> Result<ReplicateSummary, RunnerError> {
    let seed = replicate_seed(cfg.seed, index);
    let ga = cfg.replicate_ga(seed);
    let dir = replicate_dir(&cfg.output, index);
    fs::create_dir_all(&dir).map_err(|e| RunnerError::io(&dir, e))?;
    let summary = |started_at| -> Result<ReplicateSummary, RunnerError> {
        Ok(ReplicateSummary { index, seed, dir: dir.clone(), final_mean: final_mean(&dir)?, started_at })
    };
    if dir.join(FINAL_POPULATION_FILE).exists() {
        return summary(None);
    }
    let stats_path = dir.join(STATS_FILE);
    let resume = match latest_checkpoint(&dir)? {
        Some(g) if stats_path.exists() => {
            let path = dir.join(checkpoint_name(g));
            let text = fs::read_to_string(&path).map_err(|e| RunnerError::io(&path, e))?;
            let pop = read_population(&text).map_err(|source| RunnerError::GenomeFile { path, source })?;
            truncate_stats(&stats_path, g)?;
            Some((g, pop))
        }
        _ => None,
    };
    let started_at = resume.as_ref().map_or(0, |(g, _)| *g);
    let file = if resume.is_some() {
        OpenOptions::new().append(true).open(&stats_path)
    } else {
        File::create(&stats_path)
    }
    .map_err(|e| RunnerError::io(&stats_path, e))?;
    let mut writer = RunWriter { dir: dir.clone(), stats: BufWriter::new(file) };
    if resume.is_none() {
        let header = format!("{}\n{STATS_CSV_HEADER}\n", stats_comment(&ga, index, cfg));
        writer.stats.write_all(header.as_bytes()).map_err(|e| RunnerError::io(&stats_path, e))?;
    }
    match resume {
        Some((g, pop)) => evolve_from(&ga, env, g, pop, &mut writer)?,
        None => evolve(&ga, env, &mut writer)?,
    };
    summary(Some(started_at))
}

/// Writes the snapshot, or checks it against `cfg` when the run directory
/// already has one.
fn prepare_run_dir(cfg: &ExperimentConfig, env: &Environment) -> Result<(), RunnerError> {
    let out = &cfg.output;
    fs::create_dir_all(out).map_err(|e| RunnerError::io(out, e))?;
    let snap_path = out.join(SNAPSHOT_FILE);
    if snap_path.exists() {
        let previous = ExperimentConfig::load(&snap_path)?;
        let mut keys: Vec<String> = cfg.differences(&previous).into_iter().filter(|k| k != "map").collect();
        if previous.map.load()?.fingerprint() != env.fingerprint() {
            keys.insert(0, "map".into());
        }
        if !keys.is_empty() {
            return Err(RunnerError::SnapshotMismatch { path: snap_path, keys });
        }
        return Ok(());
    }
    let mut snap = cfg.clone();
    if let MapSource::File(_) = cfg.map {
        let copy = out.join(MAP_COPY_FILE);
        fs::write(&copy, env.to_map_string()).map_err(|e| RunnerError::io(&copy, e))?;
        snap.map = MapSource::File(PathBuf::from(MAP_COPY_FILE));
    }
    let text = snap.snapshot(&format!("{TOOL_VERSION} seed={}", cfg.seed));
    write_atomic(&snap_path, |w| w.write_all(text.as_bytes()))
}

/// Runs (or resumes) every replicate of an experiment into `cfg.output`.
///
/// Replicates run concurrently. Each one derives its seed from the master
/// seed and its index only, so the output does not depend on thread count.
pub fn cli_evolve(cfg: &ExperimentConfig) -> Result<Vec<ReplicateSummary>, RunnerError> {
    cfg.validate()?;
    let env = cfg.map.load()?;
    prepare_run_dir(cfg, &env)?;
    (0..cfg.replicates).into_par_iter().map(|i| run_replicate(cfg, &env, i)).collect()
}
