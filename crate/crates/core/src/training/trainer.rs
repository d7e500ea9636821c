use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::data::{Batch, Batcher, SentencePair};
use crate::error::{Error, Result};
use crate::evaluation::teacher_forced;
use crate::model::{forward_batch, ModelConfig, ModelParams};
use crate::scalar::Scalar;
use crate::tensor::Tape;

use super::{
    adadelta_step, clip_grad_norm, init_params, save_checkpoint, Dropout, OptimizerState, TrainConfig,
};

/// Dev-set summary after one epoch; the metrics log holds one per line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-token training loss over the epoch (with dropout active).
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_accuracy: f64,
}

impl EpochMetrics {
    pub fn tsv_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}",
            self.epoch, self.train_loss, self.dev_loss, self.dev_accuracy
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult<T> {
    /// Parameters of the epoch with the lowest dev loss.
    pub best: ModelParams<T>,
    pub best_epoch: usize,
    pub metrics: Vec<EpochMetrics>,
    /// Per-token loss of the very first batch, before any update.
    pub initial_loss: f64,
}

/// Files a run writes; either may be omitted.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOutputs<'a> {
    pub checkpoint: Option<&'a Path>,
    pub metrics: Option<&'a Path>,
}

/// Forward, backward, clip and update on one batch; returns the per-token
/// loss before the update. The optimised objective is the summed
/// log-likelihood per sentence, averaged over the batch.
pub fn train_step<T: Scalar>(
    params: &mut ModelParams<T>,
    opt: &mut OptimizerState<T>,
    batch: &Batch,
    cfg: &TrainConfig,
    dropout: &mut Dropout,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let fwd = forward_batch(&mut tape, &bound, batch, dropout)?;
    let vars = bound.vars().to_vec();
    drop(bound);
    let loss = tape.scale(fwd.loss, T::one() / T::from_usize(batch.size).unwrap());
    let total = tape.value(fwd.loss).values()[0].to_f64_lossy();
    if !total.is_finite() {
        return Err(Error::Numeric(format!("training loss became {total}")));
    }
    let value = total / fwd.n_tokens.max(1) as f64;
    let grads = tape.backward(loss)?;
    params.accumulate_grads(&vars, &grads)?;
    clip_grad_norm(params, cfg.clip_norm);
    adadelta_step(params, opt, cfg)?;
    Ok(value)
}

fn within_limit(p: &SentencePair, max_len: usize) -> bool {
    p.source_words().len() <= max_len && p.target_words().len() <= max_len
}

/// Trains from a fresh initialisation; see [`train_from`].
pub fn train<T: Scalar>(
    cfg: &TrainConfig,
    model: ModelConfig,
    train_pairs: &[SentencePair],
    dev_pairs: &[SentencePair],
    out: TrainOutputs<'_>,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainResult<T>> {
    cfg.validate()?;
    let params = init_params(model, cfg.init_scale, cfg.seed)?;
    train_from(cfg, params, train_pairs, dev_pairs, out, on_epoch)
}

/// Runs up to `max_epochs` epochs of Adadelta, evaluating the dev set after
/// each and keeping (and saving) the parameters with the lowest dev loss.
pub fn train_from<T: Scalar>(
    cfg: &TrainConfig,
    mut params: ModelParams<T>,
    train_pairs: &[SentencePair],
    dev_pairs: &[SentencePair],
    out: TrainOutputs<'_>,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainResult<T>> {
    cfg.validate()?;
    let kept: Vec<SentencePair> = train_pairs
        .iter()
        .filter(|p| within_limit(p, cfg.max_len))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::Input("no training pairs within the length limit".into()));
    }
    if dev_pairs.is_empty() {
        return Err(Error::Input("development set is empty".into()));
    }
    let mut metrics_file = match out.metrics {
        Some(p) => Some(File::create(p).map_err(|e| Error::io(p, e))?),
        None => None,
    };
    let mut batcher = Batcher::new(&kept, cfg.batch_size, cfg.seed)?;
    let mut dropout = if cfg.dropout_p > 0.0 {
        Dropout::new(cfg.dropout_p, cfg.seed)?
    } else {
        Dropout::inactive()
    };
    let mut opt = OptimizerState::new(&params);
    let mut initial_loss = None;
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    let mut metrics = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let (mut sum, mut tokens) = (0.0, 0usize);
        for batch in batcher.epoch() {
            let loss = train_step(&mut params, &mut opt, &batch, cfg, &mut dropout)?;
            initial_loss.get_or_insert(loss);
            sum += loss * batch.n_tokens() as f64;
            tokens += batch.n_tokens();
        }
        let dev = teacher_forced(&params, dev_pairs, cfg.batch_size)?;
        let m = EpochMetrics {
            epoch,
            train_loss: sum / tokens.max(1) as f64,
            dev_loss: dev.loss_per_token(),
            dev_accuracy: dev.accuracy(),
        };
        if let (Some(f), Some(p)) = (metrics_file.as_mut(), out.metrics) {
            writeln!(f, "{}", m.tsv_line()).map_err(|e| Error::io(p, e))?;
        }
        on_epoch(&m);
        metrics.push(m);
        if best.as_ref().is_none_or(|(l, _, _)| m.dev_loss < *l) {
            if let Some(p) = out.checkpoint {
                save_checkpoint(p, &params)?;
            }
            best = Some((m.dev_loss, epoch, params.clone()));
        }
        if cfg.target_accuracy.is_some_and(|a| m.dev_accuracy >= a) {
            break;
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch");
    Ok(TrainResult {
        best,
        best_epoch,
        metrics,
        initial_loss: initial_loss.unwrap_or(f64::NAN),
    })
}
