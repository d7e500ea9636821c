use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tape, Tensor, Var};
use crate::training::Dropout;

use super::gru::Gru;
use super::params::BoundParams;

/// Bidirectional encoder output for a batch.
#[derive(Debug, Clone)]
pub struct EncoderStates {
    /// `[B, m, 2d]`; position `i` is `[forward_i ; backward_i]`.
    pub states: Var,
    /// Source-attention keys `U h_i`, `[B, m, d]`.
    pub keys: Var,
    /// `[B * m]`, true for real tokens.
    pub mask: Vec<bool>,
    /// Backward state at the first position, `[B, d]`.
    pub first_backward: Var,
    pub batch: usize,
    pub len: usize,
}

/// Runs both GRU directions over `src` (`[batch, len]`, row-major). Padded
/// positions carry the running state through unchanged.
pub fn encode_batch<T: Scalar>(
    tape: &mut Tape<T>,
    w: &BoundParams<'_>,
    src: &[usize],
    mask: &[bool],
    batch: usize,
    len: usize,
    dropout: &mut Dropout,
) -> Result<EncoderStates> {
    if batch == 0 || len == 0 || src.len() != batch * len || mask.len() != batch * len {
        return Err(Error::Contract(format!(
            "encoder input of {} ids does not form a non-empty {batch}x{len} batch",
            src.len()
        )));
    }
    if (0..batch).any(|b| !mask[b * len..(b + 1) * len].iter().any(|&m| m)) {
        return Err(Error::Contract(
            "every source row needs at least one token".into(),
        ));
    }
    let d = w.config().hidden_dim;
    let embed = w.get("src.embed")?;
    let fwd = Gru::bind(w, "enc.fwd")?;
    let bwd = Gru::bind(w, "enc.bwd")?;
    let column = |i: usize| -> (Vec<usize>, Vec<bool>) {
        (
            (0..batch).map(|b| src[b * len + i]).collect(),
            (0..batch).map(|b| mask[b * len + i]).collect(),
        )
    };
    let mut xs = Vec::with_capacity(len);
    for i in 0..len {
        let (ids, _) = column(i);
        xs.push(tape.embedding(embed, &ids)?);
    }
    let zero = tape.constant(Tensor::zeros(&[batch, d]));

    let mut forward = Vec::with_capacity(len);
    let mut h = zero;
    for (i, &x) in xs.iter().enumerate() {
        let (_, m) = column(i);
        let next = fwd.step(tape, x, None, h)?;
        h = if m.iter().all(|&k| k) {
            next
        } else {
            tape.select_rows(&m, next, h)?
        };
        forward.push(h);
    }
    let mut backward = vec![zero; len];
    let mut h = zero;
    for i in (0..len).rev() {
        let (_, m) = column(i);
        let next = bwd.step(tape, xs[i], None, h)?;
        h = if m.iter().all(|&k| k) {
            next
        } else {
            tape.select_rows(&m, next, h)?
        };
        backward[i] = h;
    }

    let joined = forward
        .iter()
        .zip(&backward)
        .map(|(&f, &b)| tape.concat(&[f, b]))
        .collect::<Result<Vec<_>>>()?;
    let states = tape.stack(&joined)?;
    let states = dropout.apply(tape, states)?;
    let keys = tape.matmul(states, w.get("att.u")?)?;
    Ok(EncoderStates {
        states,
        keys,
        mask: mask.to_vec(),
        first_backward: backward[0],
        batch,
        len,
    })
}

/// Encodes a single sentence (batch of one, no padding).
pub fn encode<T: Scalar>(tape: &mut Tape<T>, w: &BoundParams<'_>, source: &[usize]) -> Result<EncoderStates> {
    if source.is_empty() {
        return Err(Error::Input("empty source sentence".into()));
    }
    let n_src = w.config().src_vocab;
    if let Some(&bad) = source.iter().find(|&&i| i >= n_src) {
        return Err(Error::Input(format!(
            "source id {bad} out of range for vocabulary of size {n_src}"
        )));
    }
    encode_batch(
        tape,
        w,
        source,
        &vec![true; source.len()],
        1,
        source.len(),
        &mut Dropout::inactive(),
    )
}
