use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::config::ExperimentConfig;
use super::RunnerError;
use crate::analysis::sweep::{generalizability_sweep, SweepResult};
use crate::brain::MarkovBrain;
use crate::evaluation::{run_trial, EvalSeeds, TrialLog};
use crate::genome::{read_population, Genome};
use crate::TOOL_VERSION;

/// Loads genome `index` from a binary genome file (8-byte little-endian
/// length, then the sites) or from a hex population file (one per line).
pub fn load_genome_file(path: &Path, index: usize) -> Result<Genome, RunnerError> {
    let bytes = fs::read(path).map_err(|e| RunnerError::io(path, e))?;
    let corrupt = |source| RunnerError::GenomeFile { path: path.to_path_buf(), source };
    // the top byte of a binary length is zero; text never contains NUL
    if bytes.len() >= 8 && bytes[7] == 0 {
        if index != 0 {
            return Err(RunnerError::IndexOutOfRange { index, len: 1 });
        }
        return Genome::read_binary(bytes.as_slice()).map_err(corrupt);
    }
    let text = String::from_utf8_lossy(&bytes);
    let mut pop = read_population(&text).map_err(corrupt)?;
    if index >= pop.len() {
        return Err(RunnerError::IndexOutOfRange { index, len: pop.len() });
    }
    Ok(pop.swap_remove(index))
}

/// Per-genome fitness column of a `final_fitness.csv`.
pub(crate) fn read_final_fitness(path: &Path) -> Result<Vec<f64>, RunnerError> {
    let text = fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
    let bad = |message: String| RunnerError::Artifact { path: path.to_path_buf(), message };
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("genome_id") && !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .nth(1)
                .ok_or_else(|| bad(format!("short row {l:?}")))?
                .parse::<f64>()
                .map_err(|e| bad(format!("row {l:?}: {e}")))
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, RunnerError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| RunnerError::io(path, e))?))
}

/// Sweeps one genome over the 21 test sizes; writes the table to `out`.
pub fn cli_sweep(
    genome_path: &Path,
    index: usize,
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<SweepResult<f64>, RunnerError> {
    let genome = load_genome_file(genome_path, index)?;
    let env = cfg.map.load()?;
    let result = generalizability_sweep(&genome, &env, &cfg.ga.trial, cfg.seed)?;
    let comment = format!("{TOOL_VERSION} seed={} genome={} index={index}", cfg.seed, genome_path.display());
    let mut w = create(out)?;
    result.write_csv(&mut w, &comment).and_then(|_| w.flush()).map_err(|e| RunnerError::io(out, e))?;
    Ok(result)
}

/// Runs one fully logged trial at the configured condition's swarm size.
pub fn cli_trial(
    genome_path: &Path,
    index: usize,
    cfg: &ExperimentConfig,
    trial: usize,
    out: &Path,
) -> Result<TrialLog, RunnerError> {
    let genome = load_genome_file(genome_path, index)?;
    let env = cfg.map.load()?;
    let brain = MarkovBrain::from_genome(&genome);
    let n = cfg.condition.swarm_size();
    let log = run_trial(&brain, &env, n, cfg.ga.trial.steps, &EvalSeeds::from_seed(cfg.seed), trial)?;
    let comment = format!("{TOOL_VERSION} seed={} trial={trial} animats={n}", cfg.seed);
    let mut w = create(out)?;
    log.write_csv(&mut w, &comment).and_then(|_| w.flush()).map_err(|e| RunnerError::io(out, e))?;
    Ok(log)
}
