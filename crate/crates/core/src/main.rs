use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use animat_swarm::runner::{
    cli_analyze, cli_evolve, cli_sweep, cli_trial, with_threads, AnalyzeMode, AnalyzeOptions, ExperimentConfig,
    RunnerError, StateGrid,
};

#[derive(Parser)]
#[command(name = "animat-swarm", version, about = "Evolve and analyse Markov-Brain animat swarms")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set generations=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, RunnerError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').ok_or_else(|| RunnerError::Syntax { line: 0, text: kv.clone() })?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every replicate of an experiment (resumes an existing run directory).
    Evolve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run directory; overrides the `output` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test one genome at 21 swarm sizes and report the AUC.
    Sweep {
        /// Binary genome or hex population file.
        #[arg(long)]
        genome: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Analyse completed run directories.
    Analyze {
        #[arg(long = "run", required_unless_present = "logs")]
        runs: Vec<PathBuf>,
        /// heatmap, states, tpm, graph or stats.
        #[arg(long)]
        mode: AnalyzeMode,
        /// Swarm sizes for states/tpm: five or sweep.
        #[arg(long, default_value = "five")]
        grid: StateGrid,
        /// Extra trial logs (heatmap, states, tpm).
        #[arg(long = "log")]
        logs: Vec<PathBuf>,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
    },
    /// Run one trial and dump the full log.
    Trial {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "trial.csv")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), RunnerError> {
    let threads = cli.threads;
    match cli.command {
        Command::Evolve { config, out } => {
            let mut cfg = config.load()?;
            if let Some(out) = out {
                cfg.output = out;
            }
            for r in with_threads(threads, || cli_evolve(&cfg))?? {
                let from = r.started_at.map_or("complete".to_string(), |g| format!("from generation {g}"));
                println!("replicate {:02} seed {} final mean {:.4} ({from})", r.index, r.seed, r.final_mean);
            }
        }
        Command::Sweep { genome, index, config, out } => {
            let cfg = config.load()?;
            let res = with_threads(threads, || cli_sweep(&genome, index, &cfg, &out))??;
            println!("auc {} -> {}", res.auc, out.display());
        }
        Command::Analyze { runs, mode, grid, logs, out } => {
            let opts = AnalyzeOptions { grid, logs };
            for path in with_threads(threads, || cli_analyze(&runs, mode, &out, &opts))?? {
                println!("{}", path.display());
            }
        }
        Command::Trial { genome, index, trial, config, out } => {
            let cfg = config.load()?;
            let log = cli_trial(&genome, index, &cfg, trial, &out)?;
            println!("{} rows -> {}", log.rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
