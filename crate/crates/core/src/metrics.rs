//! Wayfinding (NE, SR, SPL) and fidelity (nDTW, sDTW, CLS) metrics over graph
//! geodesics, plus corpus BLEU for hint text.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{DistanceTable, NodeId};

pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 3.0;
pub const METRIC_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPair {
    pub predicted: Vec<NodeId>,
    pub reference: Vec<NodeId>,
    pub success_threshold: f64,
}

impl PathPair {
    pub fn new(predicted: Vec<NodeId>, reference: Vec<NodeId>) -> Self {
        PathPair { predicted, reference, success_threshold: DEFAULT_SUCCESS_THRESHOLD }
    }

    fn check(&self) -> Result<()> {
        if self.predicted.is_empty() || self.reference.is_empty() {
            return Err(Error::UndefinedInput("empty path".into()));
        }
        Ok(())
    }
}

fn path_length(path: &[NodeId], table: &DistanceTable) -> Result<f64> {
    path.windows(2).map(|w| table.distance(w[0], w[1])).sum()
}

pub fn navigation_error(pair: &PathPair, table: &DistanceTable) -> Result<f64> {
    pair.check()?;
    table.distance(*pair.predicted.last().unwrap(), *pair.reference.last().unwrap())
}

/// 1.0 when the final position is within the threshold (inclusive).
pub fn success(pair: &PathPair, table: &DistanceTable) -> Result<f64> {
    Ok(if navigation_error(pair, table)? <= pair.success_threshold { 1.0 } else { 0.0 })
}

pub fn spl(pair: &PathPair, table: &DistanceTable) -> Result<f64> {
    let s = success(pair, table)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    let shortest = table.distance(pair.reference[0], *pair.reference.last().unwrap())?;
    let taken = path_length(&pair.predicted, table)?;
    let denom = taken.max(shortest);
    Ok(if denom == 0.0 { s } else { s * shortest / denom })
}

/// Dynamic time warping cost with graph distances as the local cost.
pub fn dtw(predicted: &[NodeId], reference: &[NodeId], table: &DistanceTable) -> Result<f64> {
    let (n, m) = (reference.len(), predicted.len());
    let mut cost = vec![vec![f64::INFINITY; m + 1]; n + 1];
    cost[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let local = table.distance(reference[i - 1], predicted[j - 1])?;
            let best = cost[i - 1][j].min(cost[i][j - 1]).min(cost[i - 1][j - 1]);
            cost[i][j] = local + best;
        }
    }
    Ok(cost[n][m])
}

pub fn ndtw(pair: &PathPair, table: &DistanceTable) -> Result<f64> {
    pair.check()?;
    let d = dtw(&pair.predicted, &pair.reference, table)?;
    Ok((-d / (pair.reference.len() as f64 * pair.success_threshold)).exp())
}

pub fn sdtw(pair: &PathPair, table: &DistanceTable) -> Result<f64> {
    Ok(success(pair, table)? * ndtw(pair, table)?)
}

/// Coverage weighted by length score.
pub fn cls(pair: &PathPair, table: &DistanceTable) -> Result<f64> {
    pair.check()?;
    let mut coverage = 0.0;
    for &r in &pair.reference {
        let mut nearest = f64::INFINITY;
        for &p in &pair.predicted {
            nearest = nearest.min(table.distance(r, p)?);
        }
        coverage += (-nearest / pair.success_threshold).exp();
    }
    let pc = coverage / pair.reference.len() as f64;
    let expected = pc * path_length(&pair.reference, table)?;
    let taken = path_length(&pair.predicted, table)?;
    let denom = expected + (taken - expected).abs();
    let ls = if denom == 0.0 { 1.0 } else { expected / denom };
    Ok(pc * ls)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub ne: f64,
    pub sr: f64,
    pub spl: f64,
    pub cls: f64,
    pub ndtw: f64,
    pub sdtw: f64,
}

pub fn episode_metrics(pair: &PathPair, table: &DistanceTable) -> Result<EpisodeMetrics> {
    Ok(EpisodeMetrics {
        ne: navigation_error(pair, table)?,
        sr: success(pair, table)?,
        spl: spl(pair, table)?,
        cls: cls(pair, table)?,
        ndtw: ndtw(pair, table)?,
        sdtw: sdtw(pair, table)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub count: usize,
    pub ne: f64,
    pub sr: f64,
    pub spl: f64,
    pub cls: f64,
    pub ndtw: f64,
    pub sdtw: f64,
}

/// Mean of a column; values are sorted first so the result does not depend
/// on episode order.
fn mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

impl MetricReport {
    pub fn aggregate(per_episode: &[EpisodeMetrics]) -> Result<Self> {
        if per_episode.is_empty() {
            return Err(Error::UndefinedInput("no episodes to aggregate".into()));
        }
        let col = |f: fn(&EpisodeMetrics) -> f64| mean(per_episode.iter().map(f).collect());
        Ok(MetricReport {
            schema_version: METRIC_SCHEMA_VERSION,
            count: per_episode.len(),
            ne: col(|m| m.ne),
            sr: col(|m| m.sr),
            spl: col(|m| m.spl),
            cls: col(|m| m.cls),
            ndtw: col(|m| m.ndtw),
            sdtw: col(|m| m.sdtw),
        })
    }

    /// Report-level invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let eps = 1e-12;
        let bounded = [self.sr, self.spl, self.cls, self.ndtw, self.sdtw];
        if bounded.iter().any(|v| !(-eps..=1.0 + eps).contains(v)) || self.ne < 0.0 {
            return Err(Error::Invalid(format!("metric out of range: {self:?}")));
        }
        if self.spl > self.sr + eps || self.sdtw > self.ndtw + eps || self.sdtw > self.sr + eps {
            return Err(Error::Invalid(format!("metric ordering violated: {self:?}")));
        }
        Ok(())
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> BTreeMap<Vec<&str>, usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(|t| t.as_ref()).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-n with uniform weights, clipped counts, a brevity
/// penalty and no smoothing.
pub fn bleu<S: AsRef<str>>(n: usize, candidates: &[Vec<S>], references: &[Vec<S>]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::UndefinedInput("empty corpus".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::UndefinedInput(format!(
            "{} candidates vs {} references",
            candidates.len(),
            references.len()
        )));
    }
    if n == 0 {
        return Err(Error::UndefinedInput("BLEU order must be at least 1".into()));
    }
    let mut matched = vec![0usize; n];
    let mut total = vec![0usize; n];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (cand, reference) in candidates.iter().zip(references) {
        cand_len += cand.len();
        ref_len += reference.len();
        for k in 1..=n {
            let rc = ngram_counts(reference, k);
            for (gram, count) in ngram_counts(cand, k) {
                matched[k - 1] += count.min(rc.get(&gram).copied().unwrap_or(0));
                total[k - 1] += count;
            }
        }
    }
    if cand_len == 0 || matched.iter().any(|&m| m == 0) {
        return Ok(0.0);
    }
    let log_precision: f64 =
        matched.iter().zip(&total).map(|(&m, &t)| (m as f64 / t as f64).ln()).sum::<f64>() / n as f64;
    let bp = if cand_len >= ref_len { 1.0 } else { (1.0 - ref_len as f64 / cand_len as f64).exp() };
    Ok(bp * log_precision.exp())
}
