//! Source attention and the target-side summaries used by the decoder
//! variants. Every scorer is additive: `v·tanh(key_i + query)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};

use super::encoder::EncoderStates;
use super::params::BoundParams;
use super::variant::Scoring;

/// A convex combination and the weights that produced it.
#[derive(Debug, Clone, Copy)]
pub struct Attended {
    /// `[B, K]`
    pub summary: Var,
    /// `[B, L]`, rows sum to one.
    pub weights: Var,
}

fn batch_of<T: Scalar>(tape: &Tape<T>, v: Var) -> usize {
    tape.shape(v)[0]
}

/// Context vector `c_t = Σ α_i h_i` with `α = softmax(v·tanh(W s_{t-1} + U h_i))`
/// over unmasked source positions.
pub fn source_attention<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    prev_hidden: Var,
    enc: &EncoderStates,
) -> Result<Attended> {
    let q = tape.matmul(prev_hidden, w.get("att.w")?)?;
    let pre = tape.add_expand(enc.keys, q)?;
    let act = tape.tanh(pre);
    let scores = tape.matmul(act, w.get("att.v")?)?;
    let scores = tape.reshape(scores, &[enc.batch, enc.len])?;
    let weights = tape.softmax_masked(scores, &enc.mask)?;
    let summary = tape.weighted_sum(weights, enc.states)?;
    Ok(Attended { summary, weights })
}

/// Unweighted mean of the previous output embeddings `y_0..y_{t-1}`.
pub fn target_summary_mean<T: Scalar>(tape: &mut Tape<T>, prev_embeddings: &[Var]) -> Result<Var> {
    if prev_embeddings.is_empty() {
        return Err(Error::Contract("mean summary over an empty history".into()));
    }
    let batch = batch_of(tape, prev_embeddings[0]);
    let n = prev_embeddings.len();
    let uniform = tape.constant(Tensor::full(&[batch, n], T::one() / T::from_usize(n).unwrap()));
    let ys = tape.stack(prev_embeddings)?;
    tape.weighted_sum(uniform, ys)
}

/// Scorer input derived from one embedding; computed once per target word.
///
/// For content scoring this is the finished score `v·tanh(W_y y)` (`[B, 1]`);
/// for content+scope it is the projection `W_y y` (`[B, e]`).
pub fn embedding_key<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    y: Var,
    scoring: Scoring,
) -> Result<Var> {
    let proj = tape.matmul(y, w.get("res.wy")?)?;
    match scoring {
        Scoring::ContentScope => Ok(proj),
        Scoring::Content => {
            let act = tape.tanh(proj);
            tape.matmul(act, w.get("res.v")?)
        }
    }
}

/// Self-attentive residual summary over cached embedding keys.
pub fn attend_embeddings<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    prev_embeddings: &[Var],
    keys: &[Var],
    current_hidden: Var,
    scoring: Scoring,
) -> Result<Attended> {
    if prev_embeddings.is_empty() || keys.len() != prev_embeddings.len() {
        return Err(Error::Contract(format!(
            "attentive summary needs a non-empty history with one key per item ({} items, {} keys)",
            prev_embeddings.len(),
            keys.len()
        )));
    }
    let batch = batch_of(tape, prev_embeddings[0]);
    let n = prev_embeddings.len();
    let scores = match scoring {
        Scoring::Content => tape.concat(keys)?,
        Scoring::ContentScope => {
            let projected = tape.stack(keys)?;
            let q = tape.matmul(current_hidden, w.get("res.ws")?)?;
            let pre = tape.add_expand(projected, q)?;
            let act = tape.tanh(pre);
            let s = tape.matmul(act, w.get("res.v")?)?;
            tape.reshape(s, &[batch, n])?
        }
    };
    let weights = tape.softmax(scores)?;
    let ys = tape.stack(prev_embeddings)?;
    let summary = tape.weighted_sum(weights, ys)?;
    Ok(Attended { summary, weights })
}

/// `d_t = Σ α_i y_i` with content or content+scope scoring.
///
/// With content scoring the unnormalised scores ignore `current_hidden`;
/// only the set of previous words decides the weights.
pub fn target_summary_attentive<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    prev_embeddings: &[Var],
    current_hidden: Var,
    scoring: Scoring,
) -> Result<Attended> {
    let keys = prev_embeddings
        .iter()
        .map(|&y| embedding_key(tape, w, y, scoring))
        .collect::<Result<Vec<_>>>()?;
    attend_embeddings(tape, w, prev_embeddings, &keys, current_hidden, scoring)
}

/// `Σ α_i s_i` with `α = softmax(v·tanh(key_i + query))`.
pub(crate) fn attend_hiddens<T: Scalar>(
    tape: &mut Tape<T>,
    prev_hiddens: &[Var],
    keys: &[Var],
    query: Var,
    v: Var,
) -> Result<Attended> {
    if prev_hiddens.is_empty() || keys.len() != prev_hiddens.len() {
        return Err(Error::Contract(
            "hidden-state attention needs at least one previous state".into(),
        ));
    }
    let batch = batch_of(tape, prev_hiddens[0]);
    let n = prev_hiddens.len();
    let k = tape.stack(keys)?;
    let pre = tape.add_expand(k, query)?;
    let act = tape.tanh(pre);
    let s = tape.matmul(act, v)?;
    let scores = tape.reshape(s, &[batch, n])?;
    let weights = tape.softmax(scores)?;
    let hs = tape.stack(prev_hiddens)?;
    let summary = tape.weighted_sum(weights, hs)?;
    Ok(Attended { summary, weights })
}

/// Scorer key of a previous decoder state for the memory RNN.
pub fn memory_key<T: Scalar>(tape: &mut Tape<T>, w: &BoundParams<'_>, s: Var) -> Result<Var> {
    tape.matmul(s, w.get("mem.wh")?)
}

/// Scorer key of a previous decoder state for the self-attentive RNN.
pub fn hidden_key<T: Scalar>(tape: &mut Tape<T>, w: &BoundParams<'_>, s: Var) -> Result<Var> {
    tape.matmul(s, w.get("sa.wh")?)
}

/// Memory-RNN read: attention over `s_1..s_{t-1}` scored from
/// `(s_i, y_{t-1}, s̃_{t-1})`.
pub fn memory_state<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    prev_hiddens: &[Var],
    prev_embedding: Var,
    prev_summary: Var,
) -> Result<Attended> {
    let keys = prev_hiddens
        .iter()
        .map(|&s| memory_key(tape, w, s))
        .collect::<Result<Vec<_>>>()?;
    memory_read(tape, w, prev_hiddens, &keys, prev_embedding, prev_summary)
}

pub(crate) fn memory_read<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    prev_hiddens: &[Var],
    keys: &[Var],
    prev_embedding: Var,
    prev_summary: Var,
) -> Result<Attended> {
    let qy = tape.matmul(prev_embedding, w.get("mem.wy")?)?;
    let qs = tape.matmul(prev_summary, w.get("mem.ws")?)?;
    let q = tape.add(qy, qs)?;
    attend_hiddens(tape, prev_hiddens, keys, q, w.get("mem.v")?)
}

/// Self-attentive-RNN read: attention over `s_1..s_{t-1}` scored from
/// `(s_i, s_t)`.
pub fn hidden_summary<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    prev_hiddens: &[Var],
    current_hidden: Var,
) -> Result<Attended> {
    let keys = prev_hiddens
        .iter()
        .map(|&s| hidden_key(tape, w, s))
        .collect::<Result<Vec<_>>>()?;
    hidden_read(tape, w, prev_hiddens, &keys, current_hidden)
}

pub(crate) fn hidden_read<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    prev_hiddens: &[Var],
    keys: &[Var],
    current_hidden: Var,
) -> Result<Attended> {
    let q = tape.matmul(current_hidden, w.get("sa.ws")?)?;
    attend_hiddens(tape, prev_hiddens, keys, q, w.get("sa.v")?)
}
