//! `key = value` experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::RunnerError;
use crate::evolution::{Condition, GaConfig};
use crate::world::{default_environment, load_environment, Environment};

/// Default number of independent evolutions per condition.
pub const DEFAULT_REPLICATES: usize = 30;

/// Name of the configuration snapshot inside a run directory.
pub const SNAPSHOT_FILE: &str = "config.txt";

/// Accepted keys, in snapshot order.
pub const KEYS: [&str; 22] = [
    "map",
    "condition",
    "replicates",
    "seed",
    "output",
    "population_size",
    "tournament_size",
    "generations",
    "initial_size",
    "initial_start_codons",
    "checkpoint_interval",
    "steps",
    "timeout",
    "reward",
    "penalty",
    "trials",
    "point_rate",
    "copy_delete_rate",
    "segment_min",
    "segment_max",
    "size_min",
    "size_max",
];

/// Map source: the built-in layout or a text map file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MapSource {
    Default,
    File(PathBuf),
}

impl MapSource {
    pub fn load(&self) -> Result<Environment, RunnerError> {
        match self {
            MapSource::Default => Ok(default_environment()),
            MapSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
                load_environment(&text).map_err(|source| RunnerError::Map { path: path.clone(), source })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub map: MapSource,
    pub condition: Condition,
    pub replicates: usize,
    /// Master seed; replicate seeds derive from it.
    pub seed: u64,
    pub output: PathBuf,
    /// GA, trial and mutation parameters. `ga.seed` and
    /// `ga.trial.swarm_size` are filled in per replicate.
    pub ga: GaConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            map: MapSource::Default,
            condition: Condition::Full,
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            output: PathBuf::from("run"),
            ga: GaConfig::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, RunnerError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| RunnerError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        message: e.to_string(),
    })
}

impl ExperimentConfig {
    /// Sets one key. Unknown keys are an error naming the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), RunnerError> {
        let v = value.trim();
        let ga = &mut self.ga;
        match key.trim() {
            "map" => {
                self.map = if v == "default" { MapSource::Default } else { MapSource::File(PathBuf::from(v)) }
            }
            "condition" => {
                self.condition = v.parse().map_err(|message| RunnerError::InvalidValue {
                    key: "condition".into(),
                    value: v.into(),
                    message,
                })?
            }
            "replicates" => self.replicates = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "output" => self.output = PathBuf::from(v),
            "population_size" => ga.population_size = parse_num(key, v)?,
            "tournament_size" => ga.tournament_size = parse_num(key, v)?,
            "generations" => ga.generations = parse_num(key, v)?,
            "initial_size" => ga.initial_size = parse_num(key, v)?,
            "initial_start_codons" => ga.initial_start_codons = parse_num(key, v)?,
            "checkpoint_interval" => ga.checkpoint_interval = parse_num(key, v)?,
            "steps" => ga.trial.steps = parse_num(key, v)?,
            "timeout" => ga.trial.timeout = parse_num(key, v)?,
            "reward" => ga.trial.reward = parse_num(key, v)?,
            "penalty" => ga.trial.penalty = parse_num(key, v)?,
            "trials" => ga.trial.trials = parse_num(key, v)?,
            "point_rate" => ga.mutation.point_rate = parse_num(key, v)?,
            "copy_delete_rate" => ga.mutation.copy_delete_rate = parse_num(key, v)?,
            "segment_min" => ga.mutation.segment_min = parse_num(key, v)?,
            "segment_max" => ga.mutation.segment_max = parse_num(key, v)?,
            "size_min" => ga.mutation.size_min = parse_num(key, v)?,
            "size_max" => ga.mutation.size_max = parse_num(key, v)?,
            other => return Err(RunnerError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), RunnerError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| RunnerError::Syntax {
                line: n + 1,
                text: raw.to_string(),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, RunnerError> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Reads a config file. A relative map path is taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let MapSource::File(p) = &cfg.map {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.map = MapSource::File(dir.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let ga = &self.ga;
        Some(match key {
            "map" => match &self.map {
                MapSource::Default => "default".into(),
                MapSource::File(p) => p.display().to_string(),
            },
            "condition" => self.condition.label().into(),
            "replicates" => self.replicates.to_string(),
            "seed" => self.seed.to_string(),
            "output" => self.output.display().to_string(),
            "population_size" => ga.population_size.to_string(),
            "tournament_size" => ga.tournament_size.to_string(),
            "generations" => ga.generations.to_string(),
            "initial_size" => ga.initial_size.to_string(),
            "initial_start_codons" => ga.initial_start_codons.to_string(),
            "checkpoint_interval" => ga.checkpoint_interval.to_string(),
            "steps" => ga.trial.steps.to_string(),
            "timeout" => ga.trial.timeout.to_string(),
            "reward" => ga.trial.reward.to_string(),
            "penalty" => ga.trial.penalty.to_string(),
            "trials" => ga.trial.trials.to_string(),
            "point_rate" => ga.mutation.point_rate.to_string(),
            "copy_delete_rate" => ga.mutation.copy_delete_rate.to_string(),
            "segment_min" => ga.mutation.segment_min.to_string(),
            "segment_max" => ga.mutation.segment_max.to_string(),
            "size_min" => ga.mutation.size_min.to_string(),
            "size_max" => ga.mutation.size_max.to_string(),
            _ => return None,
        })
    }

    /// Every key with its value, one per line, after a comment line.
    pub fn snapshot(&self, comment: &str) -> String {
        let mut s = format!("# {comment}\n");
        for key in KEYS {
            s.push_str(&format!("{key} = {}\n", self.get(key).expect("known key")));
        }
        s
    }

    /// Keys whose values differ, ignoring `output`.
    pub fn differences(&self, other: &ExperimentConfig) -> Vec<String> {
        KEYS.iter()
            .filter(|&&k| k != "output" && self.get(k) != other.get(k))
            .map(|k| k.to_string())
            .collect()
    }

    /// GA configuration of one replicate.
    pub fn replicate_ga(&self, replicate_seed: u64) -> GaConfig {
        let mut ga = self.ga.clone();
        ga.seed = replicate_seed;
        ga.trial.swarm_size = self.condition.swarm_size();
        ga
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.replicates == 0 {
            return Err(RunnerError::InvalidValue {
                key: "replicates".into(),
                value: "0".into(),
                message: "at least one replicate is required".into(),
            });
        }
        self.replicate_ga(self.seed).validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_snapshot() {
        let cfg = ExperimentConfig::default();
        let snap = cfg.snapshot("test");
        assert_eq!(ExperimentConfig::parse(&snap).unwrap(), cfg);
        assert!(snap.contains("penalty = 0.075\n"));
        assert!(snap.contains("replicates = 30\n"));
        assert!(snap.contains("condition = G_1.00\n"));
    }

    #[test]
    fn comments_and_overrides() {
        let cfg = ExperimentConfig::parse("# c\ncondition = G_0.25 # trailing\n\ngenerations=7\npenalty = 0.1\n").unwrap();
        assert_eq!(cfg.condition, Condition::Quarter);
        assert_eq!(cfg.ga.generations, 7);
        assert_eq!(cfg.ga.trial.penalty, 0.1);
        assert_eq!(cfg.replicate_ga(5).trial.swarm_size, 18);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse("populaton_size = 3").unwrap_err();
        assert!(err.to_string().contains("populaton_size"), "{err}");
        let err = ExperimentConfig::parse("steps = many").unwrap_err();
        assert!(err.to_string().contains("steps"), "{err}");
        assert!(ExperimentConfig::parse("just words").is_err());
    }

    #[test]
    fn differences_ignore_output() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output = PathBuf::from("elsewhere");
        assert!(a.differences(&b).is_empty());
        b.ga.trial.trials = 3;
        assert_eq!(a.differences(&b), vec!["trials".to_string()]);
    }
}
