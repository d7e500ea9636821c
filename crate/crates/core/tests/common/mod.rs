#![allow(dead_code)]

use arsq::data::{Batch, SentencePair, BOS, EOS};
use arsq::model::{forward_batch, BoundParams, ModelConfig, ModelParams};
use arsq::tensor::{finite_difference_report, Tape, Tensor, Var};
use arsq::training::{init_params, Dropout};
use arsq::Result;

/// Two sentence pairs of different lengths, so padding is exercised.
pub fn toy_batch(vocab: usize) -> Batch {
    let a = SentencePair {
        source: vec![4 % vocab, 7 % vocab, 9 % vocab, EOS],
        target: vec![BOS, 5 % vocab, 11 % vocab, EOS],
    };
    let b = SentencePair {
        source: vec![6 % vocab, EOS],
        target: vec![BOS, 8 % vocab, 13 % vocab, 4 % vocab, EOS],
    };
    Batch::from_pairs(&[&a, &b], vec![0, 1])
}

/// Slices a flat parameter vector back into the model's tensors on `tape`.
pub fn bind_flat<'p>(
    tape: &mut Tape<f64>,
    params: &'p ModelParams<f64>,
    flat: Var,
) -> Result<BoundParams<'p>> {
    let mut vars = Vec::with_capacity(params.len());
    let mut at = 0;
    for p in params.iter() {
        let n = p.len();
        let piece = tape.slice(flat, at, at + n)?;
        vars.push(tape.reshape(piece, p.value().shape())?);
        at += n;
    }
    BoundParams::from_vars(params, vars)
}

/// Init scale and step for full-model checks. Weights of 0.01 make many
/// gradients smaller than the rounding noise of a central difference, so the
/// check runs at a larger scale.
pub const CHECK_SCALE: f64 = 0.5;
pub const CHECK_STEP: f64 = 1e-4;

/// Largest relative gradient error over all parameters of the batch loss,
/// and the name of the worst coordinate.
pub fn model_gradient_error(config: ModelConfig, batch: &Batch, seed: u64) -> Result<(f64, String)> {
    let params: ModelParams<f64> = init_params(config, CHECK_SCALE, seed)?;
    let point = Tensor::vector(params.flatten());
    let r = finite_difference_report(
        |tape, x| {
            let w = bind_flat(tape, &params, x)?;
            Ok(forward_batch(tape, &w, batch, &mut Dropout::inactive())?.loss)
        },
        &point,
        CHECK_STEP,
    )?;
    let mut at = r.worst_index;
    let mut name = String::new();
    for p in params.iter() {
        if at < p.len() {
            name = format!(
                "{}[{at}] analytic={:e} numeric={:e}",
                p.name(),
                r.analytic,
                r.numeric
            );
            break;
        }
        at -= p.len();
    }
    Ok((r.max_relative_error, name))
}
