//! Trial execution and fitness.
//!
//! A trial places `N` clones of one brain on random start positions and runs
//! `T` lock-step updates. The fitness of one animat counts gate crossings
//! that happen at least `timeout + 1` steps after its previous crossing (any
//! crossing, rewarded or not, restarts the refractory window) and subtracts a
//! penalty for every step it shares a cell with another animat. A genome's
//! fitness is the mean, over `|R|` trials, of one randomly tracked animat.

use std::io::{self, Write};

use rand::Rng as _;
use rayon::prelude::*;
use thiserror::Error;

use crate::brain::{Controller, MarkovBrain, Motors};
use crate::genome::Genome;
use crate::num::Scalar;
use crate::seed::{self, tag};
use crate::world::{Environment, Heading, Pose, Sensors, TrialState, WorldError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("malformed log: expected {expected} steps, got {got}")]
    MalformedLog { expected: usize, got: usize },
    #[error("invalid trial configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("trial log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Trial and fitness parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialConfig<S = f64> {
    /// Steps per trial, `T`.
    pub steps: usize,
    /// Refractory window after a crossing.
    pub timeout: usize,
    pub reward: S,
    pub penalty: S,
    /// Clones per trial, `N`.
    pub swarm_size: usize,
    /// Trials per genome evaluation, `|R|`.
    pub trials: usize,
}

impl<S: Scalar> Default for TrialConfig<S> {
    fn default() -> Self {
        TrialConfig {
            steps: 500,
            timeout: 100,
            reward: S::one(),
            penalty: S::from_param(0.075),
            swarm_size: 1,
            trials: 30,
        }
    }
}

impl<S: Scalar> TrialConfig<S> {
    pub fn with_swarm_size(mut self, n: usize) -> Self {
        self.swarm_size = n;
        self
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.timeout > self.steps {
            return bad(format!("timeout {} exceeds steps {}", self.timeout, self.steps));
        }
        if self.penalty < S::zero() {
            return bad("penalty must be non-negative".into());
        }
        if self.swarm_size == 0 {
            return bad("swarm size must be positive".into());
        }
        if self.trials == 0 {
            return bad("at least one trial is required".into());
        }
        Ok(())
    }

    /// Same parameters in another scalar type.
    pub fn convert<T: Scalar>(&self) -> TrialConfig<T> {
        TrialConfig {
            steps: self.steps,
            timeout: self.timeout,
            reward: T::from_param(self.reward.to_f64_lossy()),
            penalty: T::from_param(self.penalty.to_f64_lossy()),
            swarm_size: self.swarm_size,
            trials: self.trials,
        }
    }
}

/// Fitness-relevant events of one animat at one step.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Debug)]
pub struct StepFlags {
    pub crossed: bool,
    pub collided: bool,
}

/// Integer breakdown of a fitness value.
#[derive(Clone, Copy, Default, PartialEq, Eq, Debug)]
pub struct FitnessTally {
    pub rewarded_crossings: usize,
    pub collision_steps: usize,
}

impl FitnessTally {
    pub fn score<S: Scalar>(self, reward: S, penalty: S) -> S {
        S::from_count(self.rewarded_crossings) * reward - S::from_count(self.collision_steps) * penalty
    }
}

/// Counts rewarded crossings and collision steps over the first `steps`
/// entries of `trace`.
pub fn tally(trace: &[StepFlags], steps: usize, timeout: usize) -> Result<FitnessTally, EvalError> {
    if trace.len() < steps {
        return Err(EvalError::MalformedLog { expected: steps, got: trace.len() });
    }
    let mut out = FitnessTally::default();
    let mut last_crossing: Option<usize> = None;
    for (t, flags) in trace[..steps].iter().enumerate() {
        if flags.crossed {
            if last_crossing.is_none_or(|l| t - l > timeout) {
                out.rewarded_crossings += 1;
            }
            last_crossing = Some(t);
        }
        if flags.collided {
            out.collision_steps += 1;
        }
    }
    Ok(out)
}

/// Fitness of a single animat from its per-step event trace.
pub fn animat_fitness<S: Scalar>(trace: &[StepFlags], cfg: &TrialConfig<S>) -> Result<S, EvalError> {
    Ok(tally(trace, cfg.steps, cfg.timeout)?.score(cfg.reward, cfg.penalty))
}

/// Seeds for the two random streams of a genome evaluation. Trial `i` uses
/// `derive(placement, [i])` for start cells/headings and
/// `derive(tracking, [i])` to choose the tracked animat.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct EvalSeeds {
    pub placement: u64,
    pub tracking: u64,
}

impl EvalSeeds {
    /// Placement streams are specific to the genome; tracking streams only
    /// depend on the generation, so re-evaluating a genome in the same
    /// generation tracks the same animats.
    pub fn for_genome(master: u64, generation: u64, genome: u64) -> Self {
        EvalSeeds {
            placement: seed::derive(master, &[tag::PLACE, generation, genome]),
            tracking: seed::derive(master, &[tag::TRACK, generation]),
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        EvalSeeds {
            placement: seed::derive(seed, &[tag::PLACE]),
            tracking: seed::derive(seed, &[tag::TRACK]),
        }
    }

    pub fn tracked_animat(&self, trial: usize, swarm_size: usize) -> usize {
        seed::stream(self.tracking, &[trial as u64]).random_range(0..swarm_size)
    }

    pub fn placement_stream(&self, trial: usize) -> seed::Rng {
        seed::stream(self.placement, &[trial as u64])
    }
}

/// Runs one trial, calling `observe` after every step.
pub fn simulate<C, F>(
    brain: &C,
    env: &Environment,
    swarm_size: usize,
    steps: usize,
    rng: &mut seed::Rng,
    mut observe: F,
) -> Result<TrialState, EvalError>
where
    C: Controller + ?Sized,
    F: FnMut(usize, &TrialState),
{
    let mut state = TrialState::place(env, swarm_size, rng)?;
    for t in 0..steps {
        state.step(env, brain);
        observe(t, &state);
    }
    Ok(state)
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct TrialFitness<S> {
    pub trial: usize,
    pub tracked: usize,
    pub fitness: S,
}

/// Per-trial fitness of the tracked animats and their mean.
#[derive(Clone, PartialEq, Debug)]
pub struct FitnessReport<S = f64> {
    pub trials: Vec<TrialFitness<S>>,
    pub mean: S,
}

impl<S: Scalar> FitnessReport<S> {
    pub fn from_trials(trials: Vec<TrialFitness<S>>) -> Self {
        let values: Vec<S> = trials.iter().map(|t| t.fitness).collect();
        FitnessReport { mean: crate::num::mean(&values), trials }
    }

    /// Appends `generation,genome_id,trial,tracked_animat,f` rows and a
    /// closing `generation,genome_id,mean,,F` summary row.
    pub fn write_csv_rows<W: Write>(&self, mut w: W, generation: usize, genome_id: usize) -> io::Result<()> {
        for t in &self.trials {
            writeln!(w, "{generation},{genome_id},{},{},{}", t.trial, t.tracked, t.fitness.to_f64_lossy())?;
        }
        writeln!(w, "{generation},{genome_id},mean,,{}", self.mean.to_f64_lossy())
    }
}

pub const FITNESS_CSV_HEADER: &str = "generation,genome_id,trial,tracked_animat,f";

/// One trial, scoring only the tracked animat.
pub fn trial_fitness<S: Scalar, C: Controller + ?Sized>(
    brain: &C,
    env: &Environment,
    cfg: &TrialConfig<S>,
    seeds: &EvalSeeds,
    trial: usize,
) -> Result<TrialFitness<S>, EvalError> {
    let tracked = seeds.tracked_animat(trial, cfg.swarm_size);
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut rng = seeds.placement_stream(trial);
    simulate(brain, env, cfg.swarm_size, cfg.steps, &mut rng, |_, st| {
        let ev = st.events();
        trace.push(StepFlags { crossed: ev.crossed[tracked], collided: ev.collided[tracked] });
    })?;
    Ok(TrialFitness { trial, tracked, fitness: animat_fitness(&trace, cfg)? })
}

/// Mean tracked-animat fitness of a compiled brain over `cfg.trials` trials.
/// Trials run in parallel; the result does not depend on scheduling.
pub fn brain_fitness<S: Scalar, C: Controller + ?Sized>(
    brain: &C,
    env: &Environment,
    cfg: &TrialConfig<S>,
    seeds: &EvalSeeds,
) -> Result<FitnessReport<S>, EvalError> {
    cfg.validate()?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| trial_fitness(brain, env, cfg, seeds, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FitnessReport::from_trials(trials))
}

pub fn genome_fitness<S: Scalar>(
    g: &Genome,
    env: &Environment,
    cfg: &TrialConfig<S>,
    seeds: &EvalSeeds,
) -> Result<FitnessReport<S>, EvalError> {
    brain_fitness(&MarkovBrain::from_genome(g), env, cfg, seeds)
}

/// One animat at one step. Sensor bits are those observed at the logged
/// pose (they drive the motors of the next row); motors are the action
/// that produced the logged pose.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct LogRow {
    pub step: usize,
    pub animat: usize,
    pub pose: Pose,
    pub sensors: Sensors,
    pub motors: Motors,
    pub collided: bool,
    pub crossed: bool,
}

/// Full record of a trial, rows ordered by step then animat.
#[derive(Clone, PartialEq, Debug)]
pub struct TrialLog {
    pub env_fingerprint: u64,
    pub swarm_size: usize,
    pub steps: usize,
    pub rows: Vec<LogRow>,
}

pub const TRIAL_CSV_HEADER: &str = "step,animat_id,x,y,heading,wall_bit,animat_bit,m_l,m_r,collided,crossed";

impl TrialLog {
    pub fn row(&self, step: usize, animat: usize) -> &LogRow {
        &self.rows[step * self.swarm_size + animat]
    }

    pub fn animat_rows(&self, animat: usize) -> impl Iterator<Item = &LogRow> + '_ {
        self.rows.iter().skip(animat).step_by(self.swarm_size.max(1))
    }

    pub fn animat_trace(&self, animat: usize) -> Vec<StepFlags> {
        self.animat_rows(animat)
            .map(|r| StepFlags { crossed: r.crossed, collided: r.collided })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, comment: &str) -> io::Result<()> {
        writeln!(w, "# {comment} env={:016x}", self.env_fingerprint)?;
        writeln!(w, "{TRIAL_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.step,
                r.animat,
                r.pose.x,
                r.pose.y,
                r.pose.heading.name(),
                r.sensors.wall as u8,
                r.sensors.animat as u8,
                r.motors.left as u8,
                r.motors.right as u8,
                r.collided as u8,
                r.crossed as u8
            )?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`TrialLog::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self, EvalError> {
        let mut env_fingerprint = 0;
        let mut rows = Vec::new();
        let mut seen_header = false;
        for (idx, line) in text.lines().enumerate() {
            let err = |message: String| EvalError::Parse { line: idx + 1, message };
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(hex) = comment.split_whitespace().find_map(|w| w.strip_prefix("env=")) {
                    env_fingerprint = u64::from_str_radix(hex, 16).map_err(|e| err(e.to_string()))?;
                }
                continue;
            }
            if !seen_header {
                if line.trim() != TRIAL_CSV_HEADER {
                    return Err(err(format!("expected header {TRIAL_CSV_HEADER:?}")));
                }
                seen_header = true;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(err(format!("expected 11 fields, found {}", f.len())));
            }
            let num = |i: usize| f[i].trim().parse::<usize>().map_err(|e| err(format!("field {}: {e}", i + 1)));
            let bit = |i: usize| match f[i].trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(err(format!("field {}: expected 0 or 1, found {other:?}", i + 1))),
            };
            let heading = Heading::from_name(f[4].trim()).ok_or_else(|| err(format!("unknown heading {:?}", f[4])))?;
            rows.push(LogRow {
                step: num(0)?,
                animat: num(1)?,
                pose: Pose::new(num(2)?, num(3)?, heading),
                sensors: Sensors { wall: bit(5)?, animat: bit(6)? },
                motors: Motors::new(bit(7)?, bit(8)?),
                collided: bit(9)?,
                crossed: bit(10)?,
            });
        }
        let swarm_size = rows.iter().map(|r| r.animat + 1).max().unwrap_or(0);
        let steps = rows.iter().map(|r| r.step + 1).max().unwrap_or(0);
        if rows.len() != swarm_size * steps {
            return Err(EvalError::Parse {
                line: 0,
                message: format!("{} rows do not form a {steps} x {swarm_size} grid", rows.len()),
            });
        }
        for (k, r) in rows.iter().enumerate() {
            if (r.step, r.animat) != (k / swarm_size, k % swarm_size) {
                return Err(EvalError::Parse { line: 0, message: "rows are not ordered by step then animat".into() });
            }
        }
        Ok(TrialLog { env_fingerprint, swarm_size, steps, rows })
    }
}

/// Runs trial `trial` of an evaluation with full logging.
pub fn run_trial<C: Controller + ?Sized>(
    brain: &C,
    env: &Environment,
    swarm_size: usize,
    steps: usize,
    seeds: &EvalSeeds,
    trial: usize,
) -> Result<TrialLog, EvalError> {
    let mut rows = Vec::with_capacity(swarm_size * steps);
    let mut rng = seeds.placement_stream(trial);
    simulate(brain, env, swarm_size, steps, &mut rng, |t, st| {
        let ev = st.events();
        for a in 0..st.len() {
            rows.push(LogRow {
                step: t,
                animat: a,
                pose: st.poses()[a],
                sensors: st.sensors()[a],
                motors: ev.motors[a],
                collided: ev.collided[a],
                crossed: ev.crossed[a],
            });
        }
    })?;
    Ok(TrialLog { env_fingerprint: env.fingerprint(), swarm_size, steps, rows })
}
