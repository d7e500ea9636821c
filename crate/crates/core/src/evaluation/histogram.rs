use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::inference::AttentionTrace;

/// Index of the largest weight; ties go to the most recent position.
pub fn argmax_recent(row: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in row.iter().enumerate() {
        if best.is_none_or(|b| x >= row[b]) {
            best = Some(i);
        }
    }
    best
}

/// Normalised frequency with which each relative position `-1, -2, ...`
/// received the maximal target-side attention.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionHistogram {
    /// `frequencies[k]` belongs to relative position `-(k + 1)`.
    pub frequencies: Vec<f64>,
    /// Raw argmax counts per position.
    pub counts: Vec<usize>,
    /// Steps at which the position existed.
    pub opportunities: Vec<usize>,
}

impl PositionHistogram {
    pub fn max_len(&self) -> usize {
        self.frequencies.len()
    }

    /// Frequency at relative position `-k`.
    pub fn at(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.frequencies.get(k - 1).copied().unwrap_or(0.0)
    }

    /// `relative_position TAB frequency`, nearest position first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, f) in self.frequencies.iter().enumerate() {
            let _ = writeln!(out, "-{}\t{f:.6}", k + 1);
        }
        out
    }
}

/// Counts, per step, the relative position of the most attended previous
/// item, divides each position's count by the number of steps at which that
/// position was available, and renormalises to a distribution.
pub fn max_attention_histogram(traces: &[AttentionTrace]) -> Result<PositionHistogram> {
    let mut counts: Vec<usize> = Vec::new();
    let mut opportunities: Vec<usize> = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        if !t.has_target_attention() {
            return Err(Error::Contract(format!("trace {i} has no target-side attention")));
        }
        for row in &t.target_attention {
            let Some(j) = argmax_recent(row) else { continue };
            let n = row.len();
            if counts.len() < n {
                counts.resize(n, 0);
                opportunities.resize(n, 0);
            }
            counts[n - j - 1] += 1;
            opportunities[..n].iter_mut().for_each(|o| *o += 1);
        }
    }
    let rates: Vec<f64> = counts
        .iter()
        .zip(&opportunities)
        .map(|(&c, &o)| if o == 0 { 0.0 } else { c as f64 / o as f64 })
        .collect();
    let total: f64 = rates.iter().sum();
    let frequencies = if total > 0.0 {
        rates.iter().map(|r| r / total).collect()
    } else {
        rates
    };
    Ok(PositionHistogram {
        frequencies,
        counts,
        opportunities,
    })
}
