use crate::data::{Batch, Batcher, SentencePair};
use crate::error::{Error, Result};
use crate::model::{argmax_rows, forward_batch, ModelParams};
use crate::scalar::Scalar;
use crate::tensor::Tape;
use crate::training::Dropout;

/// Teacher-forced scores of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherForced {
    pub total_nll: f64,
    pub n_tokens: usize,
    /// Scored tokens whose argmax prediction equals the reference.
    pub correct: usize,
    /// Per input row: argmax prediction at every target position
    /// (first word through EOS).
    pub predictions: Vec<Vec<usize>>,
}

impl TeacherForced {
    pub fn loss_per_token(&self) -> f64 {
        self.total_nll / self.n_tokens.max(1) as f64
    }

    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.n_tokens.max(1) as f64
    }

    pub fn perplexity(&self) -> f64 {
        self.loss_per_token().exp()
    }
}

fn run_batches<T: Scalar>(params: &ModelParams<T>, batches: &[Batch], rows: usize) -> Result<TeacherForced> {
    let mut report = TeacherForced {
        total_nll: 0.0,
        n_tokens: 0,
        correct: 0,
        predictions: vec![Vec::new(); rows],
    };
    for batch in batches {
        let mut tape = Tape::new();
        let bound = params.bind_frozen(&mut tape);
        let fwd = forward_batch(&mut tape, &bound, batch, &mut Dropout::inactive())?;
        let nll = tape.value(fwd.loss).values()[0].to_f64_lossy();
        if !nll.is_finite() {
            return Err(Error::Numeric(format!("non-finite evaluation loss {nll}")));
        }
        report.total_nll += nll;
        report.n_tokens += fwd.n_tokens;
        for (t, &lp) in fwd.log_probs.iter().enumerate() {
            let pred = argmax_rows(tape.value(lp));
            let gold = batch.gold_tokens(t);
            let mask = batch.gold_mask(t);
            for b in 0..batch.size {
                if mask[b] {
                    report.predictions[batch.indices[b]].push(pred[b]);
                    if pred[b] == gold[b] {
                        report.correct += 1;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Scores `pairs` with reference prefixes fed as previous tokens.
pub fn teacher_forced<T: Scalar>(
    params: &ModelParams<T>,
    pairs: &[SentencePair],
    batch_size: usize,
) -> Result<TeacherForced> {
    if pairs.is_empty() {
        return Err(Error::Input("evaluation corpus is empty".into()));
    }
    let batches = Batcher::in_order(pairs, batch_size)?;
    run_batches(params, &batches, pairs.len())
}

/// `exp(total NLL / tokens)` of a language model over BOS..EOS sequences.
pub fn perplexity<T: Scalar>(
    params: &ModelParams<T>,
    corpus: &[Vec<usize>],
    batch_size: usize,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Input("perplexity over an empty corpus".into()));
    }
    if batch_size == 0 {
        return Err(Error::Input("batch size must be positive".into()));
    }
    if corpus.iter().any(|s| s.len() < 2) {
        return Err(Error::Input(
            "every sequence needs BOS, EOS and optional words".into(),
        ));
    }
    let batches: Vec<Batch> = corpus
        .chunks(batch_size)
        .enumerate()
        .map(|(k, c)| {
            let rows: Vec<&[usize]> = c.iter().map(|s| s.as_slice()).collect();
            Batch::from_targets(&rows, (k * batch_size..k * batch_size + c.len()).collect())
        })
        .collect();
    Ok(run_batches(params, &batches, corpus.len())?.perplexity())
}
