//! Generalizability sweep: a genome evolved at one swarm size, tested at 21.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::brain::MarkovBrain;
use crate::evaluation::{brain_fitness, EvalError, EvalSeeds, TrialConfig};
use crate::genome::Genome;
use crate::num::Real;
use crate::seed::{self, tag};
use crate::world::{Environment, START_POSITIONS};

/// Trials per test size.
pub const SWEEP_TRIALS: usize = 30;

/// One test condition of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TestSize {
    /// Percent of the 72 start positions, or `None` for the single animat.
    pub percent: Option<u32>,
    pub animats: usize,
}

impl TestSize {
    pub fn label(&self) -> String {
        match self.percent {
            Some(p) => format!("{p}%"),
            None => "single".to_string(),
        }
    }

    /// Position on the AUC axis.
    pub fn fraction(&self) -> f64 {
        self.animats as f64 / START_POSITIONS as f64
    }
}

/// 100%, 95%, ..., 5% of the start positions, then the single animat.
pub fn test_sizes() -> Vec<TestSize> {
    let mut sizes: Vec<TestSize> = (1..=20u32)
        .rev()
        .map(|k| {
            let animats = ((0.05 * k as f64 * START_POSITIONS as f64).round() as usize).max(1);
            TestSize { percent: Some(5 * k), animats }
        })
        .collect();
    sizes.push(TestSize { percent: None, animats: 1 });
    sizes
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepEntry<R> {
    pub size: TestSize,
    pub mean: R,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult<R = f64> {
    pub entries: Vec<SweepEntry<R>>,
    pub auc: R,
}

/// Trapezoidal area of mean fitness over swarm fraction. Points are sorted
/// by fraction first; points sharing a fraction are averaged.
pub fn auc<R: Real>(points: &[(f64, R)]) -> R {
    let mut pts: Vec<(f64, R)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal)));
    let mut merged: Vec<(f64, R, usize)> = Vec::new();
    for (x, y) in pts {
        match merged.last_mut() {
            Some((lx, ly, n)) if *lx == x => {
                *ly = *ly + y;
                *n += 1;
            }
            _ => merged.push((x, y, 1)),
        }
    }
    let half = R::from_f64(0.5).unwrap();
    merged
        .iter()
        .map(|&(x, y, n)| (R::from_f64(x).unwrap(), y / R::from_count(n)))
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * half)
        .fold(R::zero(), |a, b| a + b)
}

impl<R: Real> SweepResult<R> {
    pub fn from_entries(entries: Vec<SweepEntry<R>>) -> Self {
        let points: Vec<(f64, R)> = entries.iter().map(|e| (e.size.fraction(), e.mean)).collect();
        SweepResult { auc: auc(&points), entries }
    }

    /// Mean fitness at the given label (`"100%"`, ..., `"single"`).
    pub fn mean_at(&self, label: &str) -> Option<R> {
        self.entries.iter().find(|e| e.size.label() == label).map(|e| e.mean)
    }

    /// One row per test size, then a `# auc=` footer.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &str) -> io::Result<()> {
        writeln!(w, "# {comment}")?;
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{}", e.size.label(), e.size.animats, e.size.fraction(), e.mean.to_f64_lossy())?;
        }
        writeln!(w, "# auc={}", self.auc.to_f64_lossy())
    }
}

pub const SWEEP_CSV_HEADER: &str = "test_size,animats,fraction,mean_fitness";

/// Evaluates `g` at every test size with `SWEEP_TRIALS` trials each.
/// `cfg.swarm_size` and `cfg.trials` are overridden.
pub fn generalizability_sweep<R: Real>(
    g: &Genome,
    env: &Environment,
    cfg: &TrialConfig<R>,
    seed: u64,
) -> Result<SweepResult<R>, EvalError> {
    let brain = MarkovBrain::from_genome(g);
    let entries = test_sizes()
        .into_par_iter()
        .enumerate()
        .map(|(i, size)| {
            let mut c = cfg.clone().with_swarm_size(size.animats);
            c.trials = SWEEP_TRIALS;
            let seeds = EvalSeeds::from_seed(seed::derive(seed, &[tag::SWEEP, i as u64]));
            Ok(SweepEntry { size, mean: brain_fitness(&brain, env, &c, &seeds)?.mean })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(SweepResult::from_entries(entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_enumeration() {
        let sizes = test_sizes();
        assert_eq!(sizes.len(), 21);
        let animats: Vec<usize> = sizes.iter().map(|s| s.animats).collect();
        assert_eq!(
            animats,
            vec![72, 68, 65, 61, 58, 54, 50, 47, 43, 40, 36, 32, 29, 25, 22, 18, 14, 11, 7, 4, 1]
        );
        assert_eq!(sizes[0].label(), "100%");
        assert_eq!(sizes[19].label(), "5%");
        assert_eq!(sizes[20].label(), "single");
    }

    #[test]
    fn constant_fitness_area_is_axis_span() {
        let entries: Vec<_> = test_sizes().into_iter().map(|size| SweepEntry { size, mean: 1.0f64 }).collect();
        let r = SweepResult::from_entries(entries);
        assert!((r.auc - 71.0 / 72.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_by_hand() {
        // (0,0) (0.5,1) (1,1): 0.25 + 0.5
        assert_eq!(auc(&[(1.0, 1.0), (0.0, 0.0), (0.5, 1.0)]), 0.75);
        assert_eq!(auc::<f64>(&[(0.3, 2.0)]), 0.0);
    }

    #[test]
    fn zero_gate_genome_scores_zero_everywhere() {
        let g = Genome::from_sites(vec![0; 2000]);
        let env = Environment::default();
        let cfg = TrialConfig::<f64> { steps: 50, timeout: 10, ..Default::default() };
        let r = generalizability_sweep(&g, &env, &cfg, 3).unwrap();
        assert_eq!(r.entries.len(), 21);
        assert!(r.entries.iter().all(|e| e.mean == 0.0));
        assert_eq!(r.auc, 0.0);
    }
}
