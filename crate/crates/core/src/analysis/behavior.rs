//! Behaviour statistics computed from trial logs.

use std::fmt;
use std::io::{self, Write};

use rand::Rng;

use super::AnalysisError;
use crate::brain::Motors;
use crate::evaluation::TrialLog;
use crate::seed;
use crate::world::{Environment, Sensors};

/// Swarm sizes used for state statistics: 100%, 75%, 50%, 25%, single.
pub const STATE_TEST_SIZES: [usize; 5] = [72, 54, 36, 18, 1];

/// Bootstrap resamples for confidence intervals.
pub const BOOTSTRAP_RESAMPLES: usize = 10_000;

/// Per-cell animat-step counts, indexed `[y][x]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<Vec<u64>>,
}

impl Heatmap {
    pub fn get(&self, x: usize, y: usize) -> u64 {
        self.counts[y][x]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Grid rows as CSV lines (row `y` of the map on line `y`).
    pub fn write_csv<W: Write>(&self, mut w: W, comment: &str) -> io::Result<()> {
        writeln!(w, "# {comment}")?;
        let header: Vec<String> = (0..self.width).map(|x| format!("x{x}")).collect();
        writeln!(w, "y,{}", header.join(","))?;
        for (y, row) in self.counts.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(w, "{y},{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn check_env(env: &Environment, logs: &[TrialLog]) -> Result<(), AnalysisError> {
    let fp = env.fingerprint();
    match logs.iter().find(|l| l.env_fingerprint != fp) {
        Some(l) => Err(AnalysisError::MixedEnvironments { expected: fp, found: l.env_fingerprint }),
        None => Ok(()),
    }
}

/// Total time spent by any animat in each cell.
pub fn occupancy_heatmap(env: &Environment, logs: &[TrialLog]) -> Result<Heatmap, AnalysisError> {
    check_env(env, logs)?;
    let (width, height) = (env.width(), env.height());
    let mut counts = vec![vec![0u64; width]; height];
    for r in logs.iter().flat_map(|l| &l.rows) {
        counts[r.pose.y][r.pose.x] += 1;
    }
    Ok(Heatmap { width, height, counts })
}

/// Fractions of animat-steps spent moving forward, turning and standing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotorFrequencies {
    pub moves: f64,
    pub turns: f64,
    pub stays: f64,
}

pub fn motor_state_frequencies(logs: &[TrialLog]) -> Result<MotorFrequencies, AnalysisError> {
    let (mut moves, mut turns, mut stays) = (0u64, 0u64, 0u64);
    for r in logs.iter().flat_map(|l| &l.rows) {
        match (r.motors.left, r.motors.right) {
            (true, true) => moves += 1,
            (false, false) => stays += 1,
            _ => turns += 1,
        }
    }
    let total = (moves + turns + stays) as f64;
    if total == 0.0 {
        return Err(AnalysisError::EmptyLogs);
    }
    Ok(MotorFrequencies { moves: moves as f64 / total, turns: turns as f64 / total, stays: stays as f64 / total })
}

/// Sensor input at `t` together with the action taken at `t + 1`, as the
/// bits `wall, animat, turn, forward` (most significant first).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct ExternalStateCode(u8);

impl ExternalStateCode {
    /// The 9 valid codes in the order used for vectors and matrices.
    pub const ALL: [ExternalStateCode; 9] = [
        ExternalStateCode(0b0000),
        ExternalStateCode(0b0001),
        ExternalStateCode(0b0010),
        ExternalStateCode(0b0100),
        ExternalStateCode(0b0101),
        ExternalStateCode(0b0110),
        ExternalStateCode(0b1000),
        ExternalStateCode(0b1001),
        ExternalStateCode(0b1010),
    ];

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.0 == bits)
    }

    /// Position in [`ExternalStateCode::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).expect("valid code")
    }

    pub fn wall(self) -> bool {
        self.0 & 0b1000 != 0
    }

    pub fn animat(self) -> bool {
        self.0 & 0b0100 != 0
    }

    pub fn turn(self) -> bool {
        self.0 & 0b0010 != 0
    }

    pub fn forward(self) -> bool {
        self.0 & 0b0001 != 0
    }
}

impl fmt::Display for ExternalStateCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04b}", self.0)
    }
}

pub fn encode_external_state(wall: bool, animat: bool, m: Motors) -> Result<ExternalStateCode, AnalysisError> {
    if wall && animat {
        return Err(AnalysisError::InvalidSensors);
    }
    let turn = m.left != m.right;
    let forward = m.left && m.right;
    Ok(ExternalStateCode((wall as u8) << 3 | (animat as u8) << 2 | (turn as u8) << 1 | forward as u8))
}

fn code(s: Sensors, m: Motors) -> Result<ExternalStateCode, AnalysisError> {
    encode_external_state(s.wall, s.animat, m)
}

/// Code sequence of one animat: `T - 1` codes pairing the sensors of row
/// `t` with the motors of row `t + 1`.
pub fn animat_codes(log: &TrialLog, animat: usize) -> Result<Vec<ExternalStateCode>, AnalysisError> {
    let rows: Vec<_> = log.animat_rows(animat).collect();
    rows.windows(2).map(|w| code(w[0].sensors, w[1].motors)).collect()
}

/// Counts of each code, in [`ExternalStateCode::ALL`] order.
pub fn state_transition_counts(logs: &[TrialLog]) -> Result<[u64; 9], AnalysisError> {
    let mut counts = [0u64; 9];
    for log in logs {
        for a in 0..log.swarm_size {
            for c in animat_codes(log, a)? {
                counts[c.index()] += 1;
            }
        }
    }
    Ok(counts)
}

/// `m[i][j]`: how often code `i` at `t` is followed by code `j` at `t + 1`.
pub type TransitionCounts = [[u64; 9]; 9];

pub fn transition_matrix(logs: &[TrialLog]) -> Result<TransitionCounts, AnalysisError> {
    let mut m = [[0u64; 9]; 9];
    for log in logs {
        for a in 0..log.swarm_size {
            let codes = animat_codes(log, a)?;
            for w in codes.windows(2) {
                m[w[0].index()][w[1].index()] += 1;
            }
        }
    }
    Ok(m)
}

/// Min-max scales each tile across conditions. A tile with the same value
/// everywhere becomes 1 if that value is nonzero and 0 otherwise.
pub fn scale_across_conditions(matrices: &[[[f64; 9]; 9]]) -> Vec<[[f64; 9]; 9]> {
    let mut out = vec![[[0.0; 9]; 9]; matrices.len()];
    for i in 0..9 {
        for j in 0..9 {
            let vals = matrices.iter().map(|m| m[i][j]);
            let lo = vals.clone().fold(f64::INFINITY, f64::min);
            let hi = vals.fold(f64::NEG_INFINITY, f64::max);
            for (k, m) in matrices.iter().enumerate() {
                out[k][i][j] = if hi > lo {
                    (m[i][j] - lo) / (hi - lo)
                } else if m[i][j] != 0.0 {
                    1.0
                } else {
                    0.0
                };
            }
        }
    }
    out
}

/// Writes 81 rows per condition: `condition,from,to,value`.
pub fn write_tpm_csv<W: Write>(mut w: W, comment: &str, labels: &[String], matrices: &[[[f64; 9]; 9]]) -> io::Result<()> {
    writeln!(w, "# {comment}")?;
    writeln!(w, "condition,from,to,value")?;
    for (label, m) in labels.iter().zip(matrices) {
        for (i, from) in ExternalStateCode::ALL.iter().enumerate() {
            for (j, to) in ExternalStateCode::ALL.iter().enumerate() {
                writeln!(w, "{label},{from},{to},{}", m[i][j])?;
            }
        }
    }
    Ok(())
}

/// Mean with a percentile confidence interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Percentile bootstrap of the mean at confidence `level` (e.g. 0.95).
pub fn bootstrap_mean_ci(samples: &[f64], resamples: usize, level: f64, seed: u64) -> Result<Interval, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::EmptyLogs);
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut rng = seed::stream(seed, &[seed::tag::BOOTSTRAP]);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let pick = |q: f64| means[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    Ok(Interval { mean, lower: pick(alpha), upper: pick(1.0 - alpha) })
}
