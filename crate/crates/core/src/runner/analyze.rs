use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::config::{ExperimentConfig, SNAPSHOT_FILE};
use super::evolve::{replicate_dir, FINAL_FITNESS_FILE, FINAL_POPULATION_FILE};
use super::files::read_final_fitness;
use super::RunnerError;
use crate::analysis::behavior::{
    bootstrap_mean_ci, motor_state_frequencies, occupancy_heatmap, scale_across_conditions, state_transition_counts,
    transition_matrix, write_tpm_csv, ExternalStateCode, BOOTSTRAP_RESAMPLES, STATE_TEST_SIZES,
};
use crate::analysis::graph::{brain_graph_metrics, BrainGraphMetrics, METRICS_CSV_HEADER};
use crate::analysis::stats::{kruskal_wallis, PairwiseTable};
use crate::analysis::sweep::test_sizes;
use crate::brain::MarkovBrain;
use crate::evaluation::{run_trial, EvalSeeds, TrialLog};
use crate::genome::{read_population, Genome};
use crate::seed::{self, tag};
use crate::world::Environment;
use crate::TOOL_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyzeMode {
    Heatmap,
    States,
    Tpm,
    Graph,
    Stats,
}

impl FromStr for AnalyzeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "heatmap" => AnalyzeMode::Heatmap,
            "states" => AnalyzeMode::States,
            "tpm" => AnalyzeMode::Tpm,
            "graph" => AnalyzeMode::Graph,
            "stats" => AnalyzeMode::Stats,
            _ => return Err(format!("unknown mode {s:?} (heatmap, states, tpm, graph, stats)")),
        })
    }
}

impl fmt::Display for AnalyzeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnalyzeMode::Heatmap => "heatmap",
            AnalyzeMode::States => "states",
            AnalyzeMode::Tpm => "tpm",
            AnalyzeMode::Graph => "graph",
            AnalyzeMode::Stats => "stats",
        })
    }
}

/// Swarm sizes the state statistics are collected over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StateGrid {
    /// 100%, 75%, 50%, 25% and single.
    #[default]
    Five,
    /// The 21 sizes of the generalizability sweep.
    Sweep,
}

impl StateGrid {
    pub fn sizes(self) -> Vec<usize> {
        match self {
            StateGrid::Five => STATE_TEST_SIZES.to_vec(),
            StateGrid::Sweep => test_sizes().iter().map(|s| s.animats).collect(),
        }
    }
}

impl FromStr for StateGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "five" => Ok(StateGrid::Five),
            "sweep" => Ok(StateGrid::Sweep),
            _ => Err(format!("unknown grid {s:?} (five, sweep)")),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeOptions {
    pub grid: StateGrid,
    /// Trial logs analysed in addition to the run directories (heatmap,
    /// states and tpm modes).
    pub logs: Vec<PathBuf>,
}

struct Replicate {
    population: Vec<Genome>,
    fitness: Vec<f64>,
}

impl Replicate {
    fn best(&self) -> &Genome {
        let i = (0..self.fitness.len())
            .fold(0, |b, i| if self.fitness[i] > self.fitness[b] { i } else { b });
        &self.population[i]
    }

    fn mean_fitness(&self) -> f64 {
        crate::num::mean(&self.fitness)
    }
}

struct Run {
    dir: PathBuf,
    cfg: ExperimentConfig,
    env: Environment,
    replicates: Vec<Replicate>,
}

impl Run {
    fn label(&self) -> &'static str {
        self.cfg.condition.label()
    }

    /// Logged trial of replicate `r`'s best genome at `n` animats.
    fn log(&self, r: usize, n: usize) -> Result<TrialLog, RunnerError> {
        let brain = MarkovBrain::from_genome(self.replicates[r].best());
        let seeds = EvalSeeds::from_seed(seed::derive(self.cfg.seed, &[tag::REPLICATE, r as u64, n as u64]));
        Ok(run_trial(&brain, &self.env, n, self.cfg.ga.trial.steps, &seeds, 0)?)
    }
}

fn load_run(dir: &Path) -> Result<Run, RunnerError> {
    let snap = dir.join(SNAPSHOT_FILE);
    if !snap.exists() {
        return Err(RunnerError::MissingArtifacts {
            dir: dir.to_path_buf(),
            missing: vec![SNAPSHOT_FILE.to_string(), format!("replicate_XX/{FINAL_POPULATION_FILE}"), format!("replicate_XX/{FINAL_FITNESS_FILE}")],
        });
    }
    let cfg = ExperimentConfig::load(&snap)?;
    let missing: Vec<String> = (0..cfg.replicates)
        .flat_map(|r| [FINAL_POPULATION_FILE, FINAL_FITNESS_FILE].map(|f| (r, f)))
        .filter(|(r, f)| !replicate_dir(dir, *r).join(f).exists())
        .map(|(r, f)| format!("replicate_{r:02}/{f}"))
        .collect();
    if !missing.is_empty() {
        return Err(RunnerError::MissingArtifacts { dir: dir.to_path_buf(), missing });
    }
    let replicates = (0..cfg.replicates)
        .map(|r| {
            let rd = replicate_dir(dir, r);
            let path = rd.join(FINAL_POPULATION_FILE);
            let text = fs::read_to_string(&path).map_err(|e| RunnerError::io(&path, e))?;
            let population =
                read_population(&text).map_err(|source| RunnerError::GenomeFile { path: path.clone(), source })?;
            let fitness = read_final_fitness(&rd.join(FINAL_FITNESS_FILE))?;
            if fitness.len() != population.len() || population.is_empty() {
                return Err(RunnerError::Artifact {
                    path: rd,
                    message: format!("{} genomes but {} fitness values", population.len(), fitness.len()),
                });
            }
            Ok(Replicate { population, fitness })
        })
        .collect::<Result<_, RunnerError>>()?;
    let env = cfg.map.load()?;
    Ok(Run { dir: dir.to_path_buf(), cfg, env, replicates })
}

fn read_logs(paths: &[PathBuf]) -> Result<Vec<TrialLog>, RunnerError> {
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| RunnerError::io(p, e))?;
            Ok(TrialLog::read_csv(&text)?)
        })
        .collect()
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), RunnerError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| RunnerError::io(path, e))?);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| RunnerError::io(path, e))
}

fn comment(runs: &[Run]) -> String {
    let seeds: Vec<String> = runs.iter().map(|r| format!("{}:{}", r.label(), r.cfg.seed)).collect();
    format!("{TOOL_VERSION} seed={}", seeds.join(";"))
}

/// Runs one analysis over completed run directories (and, for the log-based
/// modes, extra trial logs), writing CSV files into `out`. Returns the paths
/// written.
pub fn cli_analyze(
    runs: &[PathBuf],
    mode: AnalyzeMode,
    out: &Path,
    opts: &AnalyzeOptions,
) -> Result<Vec<PathBuf>, RunnerError> {
    let runs: Vec<Run> = runs.iter().map(|d| load_run(d)).collect::<Result<_, _>>()?;
    let logs = read_logs(&opts.logs)?;
    fs::create_dir_all(out).map_err(|e| RunnerError::io(out, e))?;
    let note = comment(&runs);
    let mut written = Vec::new();
    match mode {
        AnalyzeMode::Heatmap => {
            for run in &runs {
                let n = run.cfg.condition.swarm_size();
                let run_logs: Vec<TrialLog> =
                    (0..run.replicates.len()).into_par_iter().map(|r| run.log(r, n)).collect::<Result<_, _>>()?;
                let h = occupancy_heatmap(&run.env, &run_logs)?;
                let path = out.join(format!("heatmap_{}.csv", run.label()));
                write_file(&path, |w| h.write_csv(w, &format!("{note} run={}", run.dir.display())))?;
                written.push(path);
            }
            if !logs.is_empty() {
                let env = match runs.first() {
                    Some(r) => r.env.clone(),
                    None => crate::world::default_environment(),
                };
                let h = occupancy_heatmap(&env, &logs)?;
                let path = out.join("heatmap_logs.csv");
                write_file(&path, |w| h.write_csv(w, &format!("{TOOL_VERSION} logs={}", logs.len())))?;
                written.push(path);
            }
        }
        AnalyzeMode::States => {
            let sizes = opts.grid.sizes();
            let states = out.join("states.csv");
            let motor = out.join("motor.csv");
            let mut state_rows = Vec::new();
            let mut motor_rows = Vec::new();
            for run in &runs {
                // per replicate: code fractions over all test sizes
                let per_rep: Vec<(Vec<TrialLog>, [f64; 9])> = (0..run.replicates.len())
                    .into_par_iter()
                    .map(|r| {
                        let ls: Vec<TrialLog> = sizes.iter().map(|&n| run.log(r, n)).collect::<Result<_, _>>()?;
                        let c = state_transition_counts(&ls)?;
                        let total = c.iter().sum::<u64>().max(1) as f64;
                        Ok((ls, c.map(|x| x as f64 / total)))
                    })
                    .collect::<Result<_, RunnerError>>()?;
                for (k, code) in ExternalStateCode::ALL.iter().enumerate() {
                    let samples: Vec<f64> = per_rep.iter().map(|(_, f)| f[k]).collect();
                    let ci = bootstrap_mean_ci(&samples, BOOTSTRAP_RESAMPLES, 0.95, run.cfg.seed ^ k as u64)?;
                    state_rows.push(format!("{},{code},{},{},{}", run.label(), ci.mean, ci.lower, ci.upper));
                }
                for (i, &n) in sizes.iter().enumerate() {
                    let at_size: Vec<TrialLog> = per_rep.iter().map(|(ls, _)| ls[i].clone()).collect();
                    let f = motor_state_frequencies(&at_size)?;
                    motor_rows.push(format!("{},{n},{},{},{}", run.label(), f.moves, f.turns, f.stays));
                }
            }
            if !logs.is_empty() {
                let c = state_transition_counts(&logs)?;
                let total = c.iter().sum::<u64>().max(1) as f64;
                for (k, code) in ExternalStateCode::ALL.iter().enumerate() {
                    let v = c[k] as f64 / total;
                    state_rows.push(format!("logs,{code},{v},{v},{v}"));
                }
                let f = motor_state_frequencies(&logs)?;
                motor_rows.push(format!("logs,,{},{},{}", f.moves, f.turns, f.stays));
            }
            write_file(&states, |w| {
                writeln!(w, "# {note}")?;
                writeln!(w, "condition,code,mean_fraction,ci_lower,ci_upper")?;
                state_rows.iter().try_for_each(|r| writeln!(w, "{r}"))
            })?;
            write_file(&motor, |w| {
                writeln!(w, "# {note}")?;
                writeln!(w, "condition,test_size,move,turn,stay")?;
                motor_rows.iter().try_for_each(|r| writeln!(w, "{r}"))
            })?;
            written.extend([states, motor]);
        }
        AnalyzeMode::Tpm => {
            let sizes = opts.grid.sizes();
            let mut labels = Vec::new();
            let mut mats = Vec::new();
            for run in &runs {
                let per_rep: Vec<[[f64; 9]; 9]> = (0..run.replicates.len())
                    .into_par_iter()
                    .map(|r| {
                        let ls: Vec<TrialLog> = sizes.iter().map(|&n| run.log(r, n)).collect::<Result<_, _>>()?;
                        Ok(transition_matrix(&ls)?.map(|row| row.map(|x| x as f64)))
                    })
                    .collect::<Result<_, RunnerError>>()?;
                let mut mean = [[0.0; 9]; 9];
                for m in &per_rep {
                    for i in 0..9 {
                        for j in 0..9 {
                            mean[i][j] += m[i][j] / per_rep.len() as f64;
                        }
                    }
                }
                labels.push(run.label().to_string());
                mats.push(mean);
            }
            if !logs.is_empty() {
                labels.push("logs".into());
                mats.push(transition_matrix(&logs)?.map(|row| row.map(|x| x as f64)));
            }
            let scaled = scale_across_conditions(&mats);
            let path = out.join("tpm.csv");
            write_file(&path, |w| write_tpm_csv(w, &note, &labels, &scaled))?;
            let raw = out.join("tpm_raw.csv");
            write_file(&raw, |w| write_tpm_csv(w, &note, &labels, &mats))?;
            written.extend([path, raw]);
        }
        AnalyzeMode::Graph => {
            let path = out.join("graph.csv");
            write_file(&path, |w| {
                writeln!(w, "# {note}")?;
                writeln!(w, "condition,replicate,genome_id,fitness,{METRICS_CSV_HEADER}")?;
                for run in &runs {
                    for (r, rep) in run.replicates.iter().enumerate() {
                        for (i, g) in rep.population.iter().enumerate() {
                            let m: BrainGraphMetrics<f64> = brain_graph_metrics(&MarkovBrain::from_genome(g).connectivity());
                            writeln!(w, "{},{r},{i},{},{}", run.label(), rep.fitness[i], m.csv_row())?;
                        }
                    }
                }
                Ok(())
            })?;
            written.push(path);
        }
        AnalyzeMode::Stats => {
            let labels: Vec<String> = runs.iter().map(|r| r.label().to_string()).collect();
            let fitness: Vec<Vec<f64>> =
                runs.iter().map(|r| r.replicates.iter().map(Replicate::mean_fitness).collect()).collect();
            let lscc: Vec<Vec<f64>> = runs
                .iter()
                .map(|r| {
                    r.replicates
                        .iter()
                        .map(|rep| {
                            let m: BrainGraphMetrics<f64> =
                                brain_graph_metrics(&MarkovBrain::from_genome(rep.best()).connectivity());
                            m.lscc_size as f64
                        })
                        .collect()
                })
                .collect();
            for (name, groups) in [("fitness", fitness), ("lscc", lscc)] {
                let kw = kruskal_wallis(&groups).map_err(crate::analysis::AnalysisError::from)?;
                let table = PairwiseTable::compute(labels.clone(), &groups).map_err(crate::analysis::AnalysisError::from)?;
                let path = out.join(format!("stats_{name}.csv"));
                write_file(&path, |w| {
                    writeln!(w, "# {note} measure={name} kruskal_wallis_h={} p={} df={}", kw.h, kw.p, kw.df)?;
                    table.write_csv(w)
                })?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
