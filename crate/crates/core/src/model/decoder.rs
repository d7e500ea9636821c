//! One decoder time step for every variant, plus teacher-forced batch
//! forward passes used by training and evaluation.

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};
use crate::training::{nll_loss, Dropout};

use super::attention::{
    attend_embeddings, embedding_key, hidden_key, hidden_read, memory_key, memory_read, source_attention,
    target_summary_mean,
};
use super::encoder::{encode_batch, EncoderStates};
use super::gru::Gru;
use super::params::BoundParams;
use super::variant::{DecoderVariant, Mode};

/// Everything the decoder carries between steps. Cloning is cheap: only
/// tape handles are copied.
#[derive(Debug, Clone)]
pub struct DecoderState {
    /// Number of target tokens consumed so far (`t - 1` before step `t`).
    pub step: usize,
    /// `s_{t-1}`, `[B, d]`.
    pub hidden: Var,
    /// `s_1..s_{t-1}`.
    pub hiddens: Vec<Var>,
    /// `y_0..y_{t-1}` once the step has consumed its input.
    pub embeddings: Vec<Var>,
    /// Memory-RNN read `s̃_{t-1}` (zero before the first step).
    pub memory: Option<Var>,
    pub batch: usize,
    hidden_keys: Vec<Var>,
    embedding_keys: Vec<Var>,
}

/// Result of one decoder step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: DecoderState,
    /// `[B, V]` log-probabilities over the target vocabulary.
    pub log_probs: Var,
    /// `[B, m]`; absent in LM mode.
    pub source_weights: Option<Var>,
    /// Target-side attention row, absent for variants without one and for
    /// hidden-state attention at the first step.
    pub target_weights: Option<Var>,
    /// `d_t` for residual variants, `s̃_t` for hidden-state variants.
    pub summary: Option<Var>,
}

/// `s_0 = tanh(←h_1 W + b)` for translation, zeros for language models.
pub fn initial_state<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    enc: Option<&EncoderStates>,
    batch: usize,
) -> Result<DecoderState> {
    let cfg = w.config();
    let d = cfg.hidden_dim;
    let hidden = match (cfg.mode, enc) {
        (Mode::Translation, Some(enc)) => {
            if enc.batch != batch {
                return Err(Error::Contract(format!(
                    "encoder batch {} does not match decoder batch {batch}",
                    enc.batch
                )));
            }
            let a = tape.matmul(enc.first_backward, w.get("dec.init.w")?)?;
            let a = tape.add(a, w.get("dec.init.b")?)?;
            tape.tanh(a)
        }
        (Mode::LanguageModel, None) => tape.constant(Tensor::zeros(&[batch, d])),
        (Mode::Translation, None) => {
            return Err(Error::Contract("translation decoder needs encoder states".into()))
        }
        (Mode::LanguageModel, Some(_)) => {
            return Err(Error::Contract("language model takes no encoder states".into()))
        }
    };
    Ok(DecoderState {
        step: 0,
        hidden,
        hiddens: Vec::new(),
        embeddings: Vec::new(),
        memory: None,
        batch,
        hidden_keys: Vec::new(),
        embedding_keys: Vec::new(),
    })
}

/// Consumes `prev_tokens` (`y_{t-1}` for every row) and produces the
/// distribution over `y_t`.
pub fn decoder_step<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    state: &DecoderState,
    prev_tokens: &[usize],
    enc: Option<&EncoderStates>,
    dropout: &mut Dropout,
) -> Result<StepOutput> {
    let cfg = *w.config();
    let variant = cfg.variant;
    let batch = state.batch;
    if prev_tokens.len() != batch {
        return Err(Error::Contract(format!(
            "{} previous tokens for a decoder batch of {batch}",
            prev_tokens.len()
        )));
    }
    if cfg.mode == Mode::LanguageModel && !variant.supports_lm() {
        return Err(Error::Contract(format!("{variant} has no language-model form")));
    }
    if let Some(&bad) = prev_tokens.iter().find(|&&t| t >= cfg.tgt_vocab) {
        return Err(Error::Input(format!(
            "target id {bad} out of range for vocabulary of size {}",
            cfg.tgt_vocab
        )));
    }
    let d = cfg.hidden_dim;
    let mut next = state.clone();
    next.step += 1;

    let y = tape.embedding(w.get("tgt.embed")?, prev_tokens)?;
    let source = match (cfg.mode, enc) {
        (Mode::Translation, Some(enc)) => Some(source_attention(tape, w, state.hidden, enc)?),
        (Mode::Translation, None) => {
            return Err(Error::Contract("translation decoder needs encoder states".into()))
        }
        (Mode::LanguageModel, _) => None,
    };
    let context = source.map(|a| a.summary);

    let gru = Gru::bind(w, "dec.gru")?;
    let mut target_weights = None;
    let mut summary = None;
    let recurrent_in = if variant == DecoderVariant::MemoryRnn {
        let read = if state.hiddens.is_empty() {
            tape.constant(Tensor::zeros(&[batch, d]))
        } else {
            let prev = match state.memory {
                Some(m) => m,
                None => tape.constant(Tensor::zeros(&[batch, d])),
            };
            let att = memory_read(tape, w, &state.hiddens, &state.hidden_keys, y, prev)?;
            target_weights = Some(att.weights);
            att.summary
        };
        next.memory = Some(read);
        summary = Some(read);
        read
    } else {
        state.hidden
    };
    let s = gru.step(tape, y, context, recurrent_in)?;

    next.embeddings.push(y);
    let residual = match variant {
        DecoderVariant::MeanResidual => {
            let m = target_summary_mean(tape, &next.embeddings)?;
            summary = Some(m);
            Some(m)
        }
        DecoderVariant::AttnResidual(scoring) => {
            let key = embedding_key(tape, w, y, scoring)?;
            next.embedding_keys.push(key);
            let att = attend_embeddings(tape, w, &next.embeddings, &next.embedding_keys, s, scoring)?;
            target_weights = Some(att.weights);
            summary = Some(att.summary);
            Some(att.summary)
        }
        _ => None,
    };
    let self_summary = if variant == DecoderVariant::SelfAttentiveRnn {
        let read = if state.hiddens.is_empty() {
            tape.constant(Tensor::zeros(&[batch, d]))
        } else {
            let att = hidden_read(tape, w, &state.hiddens, &state.hidden_keys, s)?;
            target_weights = Some(att.weights);
            att.summary
        };
        summary = Some(read);
        Some(read)
    } else {
        None
    };

    // Output layer g.
    let s_out = dropout.apply(tape, s)?;
    let mut pre = tape.matmul(s_out, w.get("out.ls")?)?;
    let word = match residual {
        Some(r) => dropout.apply(tape, r)?,
        None => y,
    };
    let t = tape.matmul(word, w.get("out.ld")?)?;
    pre = tape.add(pre, t)?;
    if let Some(c) = context {
        let t = tape.matmul(c, w.get("out.lc")?)?;
        pre = tape.add(pre, t)?;
    }
    if let Some(m) = self_summary {
        let m = dropout.apply(tape, m)?;
        let t = tape.matmul(m, w.get("out.lm")?)?;
        pre = tape.add(pre, t)?;
    }
    pre = tape.add(pre, w.get("out.b")?)?;
    let hidden_out = tape.tanh(pre);
    let logits = tape.matmul(hidden_out, w.get("out.w")?)?;
    let logits = tape.add(logits, w.get("out.bias")?)?;
    let log_probs = tape.log_softmax(logits);

    match variant {
        DecoderVariant::MemoryRnn => next.hidden_keys.push(memory_key(tape, w, s)?),
        DecoderVariant::SelfAttentiveRnn => next.hidden_keys.push(hidden_key(tape, w, s)?),
        _ => {}
    }
    next.hiddens.push(s);
    next.hidden = s;

    Ok(StepOutput {
        state: next,
        log_probs,
        source_weights: source.map(|a| a.weights),
        target_weights,
        summary,
    })
}

/// Language-model step: the translation step with no encoder and `c_t = 0`.
pub fn lm_step<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    state: &DecoderState,
    prev_tokens: &[usize],
    dropout: &mut Dropout,
) -> Result<StepOutput> {
    if w.config().mode != Mode::LanguageModel {
        return Err(Error::Contract(
            "lm_step needs a language-model configuration".into(),
        ));
    }
    decoder_step(tape, w, state, prev_tokens, None, dropout)
}

/// Teacher-forced pass over a batch.
#[derive(Debug, Clone)]
pub struct BatchForward {
    /// Summed negative log-likelihood over unmasked target tokens.
    pub loss: Var,
    pub n_tokens: usize,
    /// One `[B, V]` log-probability matrix per target position.
    pub log_probs: Vec<Var>,
}

/// Runs encoder (translation mode) and decoder over `batch`, scoring
/// `tgt_out` under `tgt_mask`.
pub fn forward_batch<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    batch: &Batch,
    dropout: &mut Dropout,
) -> Result<BatchForward> {
    if batch.size == 0 || batch.tgt_len == 0 {
        return Err(Error::Contract("empty batch".into()));
    }
    let enc = match w.config().mode {
        Mode::Translation => Some(encode_batch(
            tape,
            w,
            &batch.src,
            &batch.src_mask,
            batch.size,
            batch.src_len,
            dropout,
        )?),
        Mode::LanguageModel => None,
    };
    let mut state = initial_state(tape, w, enc.as_ref(), batch.size)?;
    let mut log_probs = Vec::with_capacity(batch.tgt_len);
    for t in 0..batch.tgt_len {
        let out = decoder_step(tape, w, &state, &batch.prev_tokens(t), enc.as_ref(), dropout)?;
        log_probs.push(out.log_probs);
        state = out.state;
    }
    let targets: Vec<_> = (0..batch.tgt_len).map(|t| batch.gold_tokens(t)).collect();
    let mask: Vec<_> = (0..batch.tgt_len).map(|t| batch.gold_mask(t)).collect();
    let (loss, n_tokens) = nll_loss(tape, &log_probs, &targets, &mask)?;
    Ok(BatchForward {
        loss,
        n_tokens,
        log_probs,
    })
}

/// Row-wise argmax of a `[B, V]` matrix (lowest index on ties).
pub fn argmax_rows<T: Scalar>(m: &Tensor<T>) -> Vec<usize> {
    let v = m.last_dim();
    m.values()
        .chunks(v)
        .map(|row| {
            let mut best = 0;
            for (i, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
