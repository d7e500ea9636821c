use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// Corpus-level BLEU-4 without smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    /// Modified n-gram precisions for n = 1..4.
    pub precisions: [f64; 4],
    pub matches: [usize; 4],
    pub totals: [usize; 4],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub bleu: f64,
}

fn ngram_counts<W: Eq + Hash>(s: &[W], n: usize) -> HashMap<&[W], usize> {
    let mut m = HashMap::new();
    if s.len() >= n {
        for g in s.windows(n) {
            *m.entry(g).or_insert(0) += 1;
        }
    }
    m
}

pub fn bleu<W: Eq + Hash>(hypotheses: &[Vec<W>], references: &[Vec<W>]) -> Result<BleuReport> {
    if hypotheses.is_empty() {
        return Err(Error::Input("BLEU over an empty corpus".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::Input(format!(
            "{} hypotheses for {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    let mut matches = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hypotheses.iter().zip(references) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=4 {
            let rc = ngram_counts(r, n);
            for (g, c) in ngram_counts(h, n) {
                matches[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    let mut precisions = [0.0; 4];
    for n in 0..4 {
        if totals[n] > 0 {
            precisions[n] = matches[n] as f64 / totals[n] as f64;
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp().min(1.0)
    };
    let bleu = if precisions.contains(&0.0) {
        0.0
    } else {
        brevity_penalty * (precisions.iter().map(|p| p.ln()).sum::<f64>() / 4.0).exp()
    };
    Ok(BleuReport {
        precisions,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
        bleu,
    })
}
