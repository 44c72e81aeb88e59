//! Rank-based tests: Mann-Whitney U and Kruskal-Wallis H.

use std::io::{self, Write};

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::num::Real;

/// Exact enumeration is used up to this many `(a, b)` pairs.
pub const EXACT_PAIR_LIMIT: usize = 400;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("sample contains NaN")]
    NotANumber,
}

/// Result of a two-sample rank test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankTest<R> {
    /// `min(U_a, U_b)`.
    pub u: R,
    /// Two-sided p-value.
    pub p: R,
}

/// How the Mann-Whitney p-value is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PMethod {
    /// Exact when `n_a * n_b <= 400` and there are no ties, otherwise normal.
    #[default]
    Auto,
    Exact,
    /// Normal approximation with tie and continuity correction.
    Normal,
}

fn to_f64<R: Real>(v: R) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn from_f64<R: Real>(v: f64) -> R {
    R::from_f64(v).expect("finite value")
}

/// Midranks (1-based) of `values`, plus the tie term `sum(t^3 - t)`.
pub fn midranks<R: Real>(values: &[R]) -> Result<(Vec<f64>, f64), StatsError> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(StatsError::NotANumber);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    Ok((ranks, ties))
}

/// Mann-Whitney U with the default p-value method.
pub fn mann_whitney_u<R: Real>(a: &[R], b: &[R]) -> Result<RankTest<R>, StatsError> {
    mann_whitney_u_with(a, b, PMethod::Auto)
}

pub fn mann_whitney_u_with<R: Real>(a: &[R], b: &[R], method: PMethod) -> Result<RankTest<R>, StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptyGroup(0));
    }
    if b.is_empty() {
        return Err(StatsError::EmptyGroup(1));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<R> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled)?;
    let ra: f64 = ranks[..na].iter().sum();
    let ua = ra - (na * (na + 1)) as f64 / 2.0;
    let ub = (na * nb) as f64 - ua;
    let u = ua.min(ub);
    let exact = match method {
        PMethod::Exact => true,
        PMethod::Normal => false,
        PMethod::Auto => na * nb <= EXACT_PAIR_LIMIT && ties == 0.0,
    };
    let p = if exact { exact_p(na, nb, u) } else { normal_p(na, nb, u, ties) };
    Ok(RankTest { u: from_f64(u), p: from_f64(p) })
}

/// `2 * P(U <= u)` under the null, by counting rank arrangements.
fn exact_p(na: usize, nb: usize, u: f64) -> f64 {
    let max_u = na * nb;
    // ways[m][n][k]: arrangements of m a's and n b's with U_a = k, built up
    // one sample size at a time from the recurrence on the largest value.
    let mut prev: Vec<Vec<f64>> = (0..=nb)
        .map(|_| {
            let mut v = vec![0.0; max_u + 1];
            v[0] = 1.0;
            v
        })
        .collect();
    for m in 1..=na {
        let mut cur = vec![vec![0.0; max_u + 1]; nb + 1];
        cur[0][0] = 1.0;
        for n in 1..=nb {
            for k in 0..=m * n {
                // largest value is an `a`: it beats all n b's
                let from_a = if k >= n { prev[n][k - n] } else { 0.0 };
                cur[n][k] = from_a + cur[n - 1][k];
            }
        }
        prev = cur;
    }
    let dist = &prev[nb];
    let total: f64 = dist.iter().sum();
    let below: f64 = dist.iter().take(u.floor() as usize + 1).sum();
    (2.0 * below / total).min(1.0)
}

fn normal_p(na: usize, nb: usize, u: f64, ties: f64) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    let n = na + nb;
    let mu = na * nb / 2.0;
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var.is_nan() || var <= 0.0 {
        return 1.0;
    }
    let z = ((mu - u).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * std.sf(z)).min(1.0)
}

/// Kruskal-Wallis test result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KruskalWallis<R> {
    pub h: R,
    pub p: R,
    pub df: usize,
}

/// Tie-corrected H with a chi-square p-value on `groups - 1` degrees of
/// freedom. When every observation is tied the statistic is undefined; it is
/// reported as `H = 0, p = 1`.
pub fn kruskal_wallis<R: Real>(groups: &[Vec<R>]) -> Result<KruskalWallis<R>, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(StatsError::EmptyGroup(i));
    }
    let pooled: Vec<R> = groups.iter().flatten().copied().collect();
    let (ranks, ties) = midranks(&pooled)?;
    let n = pooled.len() as f64;
    let df = groups.len() - 1;
    let correction = 1.0 - ties / (n * n * n - n);
    if correction.is_nan() || correction <= 0.0 {
        return Ok(KruskalWallis { h: R::zero(), p: R::one(), df });
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = (12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    let chi = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    Ok(KruskalWallis { h: from_f64(h), p: from_f64(chi.sf(h)), df })
}

/// Lower-triangular table of pairwise tests: row `i` against column `j < i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseTable<R> {
    pub labels: Vec<String>,
    pub tests: Vec<Vec<RankTest<R>>>,
}

impl<R: Real> PairwiseTable<R> {
    pub fn compute(labels: Vec<String>, groups: &[Vec<R>]) -> Result<Self, StatsError> {
        assert_eq!(labels.len(), groups.len(), "one label per group");
        let tests = (0..groups.len())
            .map(|i| (0..i).map(|j| mann_whitney_u(&groups[i], &groups[j])).collect())
            .collect::<Result<_, _>>()?;
        Ok(PairwiseTable { labels, tests })
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&RankTest<R>> {
        self.tests.get(row)?.get(col)
    }

    /// Two lines per row group, a p-value line and a U line, with one column
    /// per earlier group. The first group has no row, the last no column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let k = self.labels.len();
        let cols = &self.labels[..k.saturating_sub(1)];
        writeln!(w, "group,measure,{}", cols.join(","))?;
        for i in 1..k {
            let pad = ",".repeat(cols.len() - i);
            let ps: Vec<String> = self.tests[i].iter().map(|t| format!("{:.4}", to_f64(t.p))).collect();
            let us: Vec<String> = self.tests[i].iter().map(|t| format!("{}", to_f64(t.u))).collect();
            writeln!(w, "{},p,{}{}", self.labels[i], ps.join(","), pad)?;
            writeln!(w, "{},U,{}{}", self.labels[i], us.join(","), pad)?;
        }
        Ok(())
    }
}
