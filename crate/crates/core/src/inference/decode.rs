use std::cmp::Ordering;

use crate::data::{Vocabulary, BOS, EOS};
use crate::error::{Error, Result};
use crate::model::{decoder_step, encode, initial_state, DecoderState, EncoderStates, Mode, ModelParams};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Var};
use crate::training::Dropout;

use super::trace::AttentionTrace;

/// A decoded (or partially decoded) target sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted ids, ending with EOS unless the length limit was hit.
    pub tokens: Vec<usize>,
    /// Sum of the chosen tokens' log-probabilities.
    pub log_prob: f64,
    pub step_log_probs: Vec<f64>,
    pub source_attention: Vec<Vec<f64>>,
    pub target_attention: Vec<Vec<f64>>,
}

impl Hypothesis {
    fn empty() -> Self {
        Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
            step_log_probs: Vec::new(),
            source_attention: Vec::new(),
            target_attention: Vec::new(),
        }
    }

    pub fn is_finished(&self) -> bool {
        self.tokens.last() == Some(&EOS)
    }

    /// Tokens before EOS.
    pub fn words(&self) -> &[usize] {
        if self.is_finished() {
            &self.tokens[..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }

    /// `log_prob / len^exponent`.
    pub fn normalized_score(&self, exponent: f64) -> f64 {
        let len = self.tokens.len().max(1) as f64;
        self.log_prob / len.powf(exponent)
    }

    pub fn trace<T: Scalar>(&self, params: &ModelParams<T>, vocab: &Vocabulary) -> AttentionTrace {
        let kind = params.config().variant.target_attention();
        AttentionTrace {
            tokens: self.tokens.iter().map(|&t| vocab.token(t).to_string()).collect(),
            source_attention: self.source_attention.clone(),
            target_attention: if kind.is_some() {
                self.target_attention.clone()
            } else {
                Vec::new()
            },
            target_kind: kind,
        }
    }
}

fn row<T: Scalar>(tape: &Tape<T>, v: Option<Var>) -> Vec<f64> {
    v.map_or_else(Vec::new, |v| {
        tape.value(v).values().iter().map(|x| x.to_f64_lossy()).collect()
    })
}

struct Live {
    hyp: Hypothesis,
    state: DecoderState,
}

struct Session<'p, T: Scalar> {
    tape: Tape<T>,
    params: &'p ModelParams<T>,
    vars: Vec<Var>,
    enc: EncoderStates,
}

impl<'p, T: Scalar> Session<'p, T> {
    fn new(params: &'p ModelParams<T>, source: &[usize]) -> Result<Self> {
        if params.config().mode != Mode::Translation {
            return Err(Error::Contract("decoding needs a translation model".into()));
        }
        let mut tape = Tape::new();
        let bound = params.bind_frozen(&mut tape);
        let enc = encode(&mut tape, &bound, source)?;
        let vars = bound.vars().to_vec();
        Ok(Session {
            tape,
            params,
            vars,
            enc,
        })
    }

    fn start(&mut self) -> Result<DecoderState> {
        let bound = crate::model::BoundParams::from_vars(self.params, self.vars.clone())?;
        initial_state(&mut self.tape, &bound, Some(&self.enc), 1)
    }

    /// Advances one hypothesis by `prev`; returns the new state, the
    /// log-distribution and the attention rows of this step.
    fn step(&mut self, state: &DecoderState, prev: usize) -> Result<StepRows> {
        let bound = crate::model::BoundParams::from_vars(self.params, self.vars.clone())?;
        let out = decoder_step(
            &mut self.tape,
            &bound,
            state,
            &[prev],
            Some(&self.enc),
            &mut Dropout::inactive(),
        )?;
        let logp = row(&self.tape, Some(out.log_probs));
        let src = row(&self.tape, out.source_weights);
        let tgt = row(&self.tape, out.target_weights);
        Ok(StepRows {
            state: out.state,
            logp,
            src,
            tgt,
        })
    }
}

struct StepRows {
    state: DecoderState,
    logp: Vec<f64>,
    src: Vec<f64>,
    tgt: Vec<f64>,
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Emits the most probable token at every step until EOS or `max_len`
/// tokens.
pub fn greedy_decode<T: Scalar>(
    params: &ModelParams<T>,
    source: &[usize],
    max_len: usize,
) -> Result<Hypothesis> {
    if max_len == 0 {
        return Err(Error::Input("maximum output length must be at least 1".into()));
    }
    let mut s = Session::new(params, source)?;
    let mut state = s.start()?;
    let mut hyp = Hypothesis::empty();
    let mut prev = BOS;
    while hyp.tokens.len() < max_len {
        let StepRows {
            state: next,
            logp,
            src,
            tgt,
        } = s.step(&state, prev)?;
        let tok = argmax(&logp);
        hyp.tokens.push(tok);
        hyp.log_prob += logp[tok];
        hyp.step_log_probs.push(logp[tok]);
        hyp.source_attention.push(src);
        hyp.target_attention.push(tgt);
        state = next;
        prev = tok;
        if tok == EOS {
            break;
        }
    }
    Ok(hyp)
}

/// Beam search with a beam that shrinks as hypotheses finish. Finished
/// hypotheses compete on `log_prob / len^length_norm`; with `beam = 1` the
/// result is the greedy path.
///
/// Pruning can drop the greedy path from a wider beam, so the greedy
/// hypothesis also takes part in the final comparison; a wider beam never
/// scores below greedy decoding.
pub fn beam_decode<T: Scalar>(
    params: &ModelParams<T>,
    source: &[usize],
    beam: usize,
    max_len: usize,
    length_norm: f64,
) -> Result<Hypothesis> {
    if beam == 0 {
        return Err(Error::Input("beam width must be at least 1".into()));
    }
    if max_len == 0 {
        return Err(Error::Input("maximum output length must be at least 1".into()));
    }
    let mut s = Session::new(params, source)?;
    let mut live = vec![Live {
        hyp: Hypothesis::empty(),
        state: s.start()?,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for step in 0..max_len {
        // (score, live index, token) over every extension of every live hypothesis
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        let mut expanded = Vec::with_capacity(live.len());
        for (i, l) in live.iter().enumerate() {
            let prev = l.hyp.tokens.last().copied().unwrap_or(BOS);
            let StepRows {
                state,
                logp,
                src,
                tgt,
            } = s.step(&l.state, prev)?;
            for (tok, &lp) in logp.iter().enumerate() {
                candidates.push((l.hyp.log_prob + lp, i, tok));
            }
            expanded.push((state, logp, src, tgt));
        }
        let width = beam - finished.len();
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut next_live = Vec::new();
        for &(score, i, tok) in candidates.iter().take(width) {
            let (state, logp, src, tgt) = &expanded[i];
            let mut hyp = live[i].hyp.clone();
            hyp.tokens.push(tok);
            hyp.log_prob = score;
            hyp.step_log_probs.push(logp[tok]);
            hyp.source_attention.push(src.clone());
            hyp.target_attention.push(tgt.clone());
            if tok == EOS || step + 1 == max_len {
                finished.push(hyp);
            } else {
                next_live.push(Live {
                    hyp,
                    state: state.clone(),
                });
            }
        }
        live = next_live;
        if live.is_empty() || finished.len() >= beam {
            break;
        }
    }
    finished.extend(live.into_iter().map(|l| l.hyp));
    if beam > 1 {
        finished.push(greedy_decode(params, source, max_len)?);
    }
    let best = finished
        .into_iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.normalized_score(length_norm)
                .partial_cmp(&b.normalized_score(length_norm))
                .unwrap_or(Ordering::Equal)
                .then(ib.cmp(ia))
        })
        .map(|(_, h)| h)
        .expect("beam search keeps at least one hypothesis");
    Ok(best)
}

/// Teacher-forced log-probability of `tokens` given `source`.
pub fn score_tokens<T: Scalar>(params: &ModelParams<T>, source: &[usize], tokens: &[usize]) -> Result<f64> {
    let mut s = Session::new(params, source)?;
    let mut state = s.start()?;
    let mut prev = BOS;
    let mut total = 0.0;
    for &tok in tokens {
        let StepRows {
            state: next, logp, ..
        } = s.step(&state, prev)?;
        let lp = *logp
            .get(tok)
            .ok_or_else(|| Error::Input(format!("target id {tok} out of range")))?;
        total += lp;
        state = next;
        prev = tok;
    }
    Ok(total)
}

/// Decoding options shared by every sentence of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    pub beam: usize,
    pub max_len: usize,
    pub length_norm: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam: 4,
            max_len: 100,
            length_norm: 1.0,
        }
    }
}

/// Decodes every source on up to `workers` threads; results keep input
/// order and do not depend on the worker count.
pub fn decode_all<T: Scalar>(
    params: &ModelParams<T>,
    sources: &[Vec<usize>],
    opts: DecodeOptions,
    workers: usize,
) -> Result<Vec<Hypothesis>> {
    let one = |src: &Vec<usize>| {
        if opts.beam == 1 {
            greedy_decode(params, src, opts.max_len)
        } else {
            beam_decode(params, src, opts.beam, opts.max_len, opts.length_norm)
        }
    };
    let workers = workers.max(1).min(sources.len().max(1));
    if workers == 1 {
        return sources.iter().map(one).collect();
    }
    let chunk = sources.len().div_ceil(workers);
    let parts: Vec<Result<Vec<Hypothesis>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sources
            .chunks(chunk)
            .map(|c| scope.spawn(move || c.iter().map(one).collect::<Result<Vec<_>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("decoding worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(sources.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
