use std::path::{Path, PathBuf};

use arsq::data::{
    load_parallel_corpus, make_synthetic_dev_task, make_synthetic_task, read_lines, SentencePair, TaskKind,
    Vocabulary,
};
use arsq::model::{DecoderVariant, Mode, ModelConfig};
use arsq::training::{train as fit, EpochMetrics, TrainConfig, TrainOutputs};
use arsq::{Precision, Scalar};

use crate::settings::{concat, dflt, opt, Flag, Settings};
use crate::{CliError, CliResult};

/// Model and optimiser flags shared by `train` and `lm train`.
pub const MODEL_FLAGS: [Flag; 17] = [
    opt(
        "decoder",
        "NAME",
        "Decoder variant: baseline, memory-rnn, self-attentive-rnn, mean-residual, attn-residual",
    ),
    opt(
        "scoring",
        "NAME",
        "Scoring for attn-residual: content or content+scope [default: content]",
    ),
    dflt("embed-dim", "N", "32", "Word embedding size e"),
    dflt("hidden-dim", "N", "64", "Hidden state size d"),
    dflt("batch-size", "N", "32", "Sentences per update"),
    dflt("epochs", "N", "10", "Maximum number of epochs"),
    dflt("seed", "N", "1", "Seed for initialisation, dropout and shuffling"),
    dflt("dropout", "P", "0.5", "Dropout probability"),
    dflt("init-scale", "X", "0.01", "Weights start as X * N(0, 1)"),
    dflt("rho", "X", "0.95", "Adadelta decay rate"),
    dflt("epsilon", "X", "1e-6", "Adadelta epsilon"),
    dflt(
        "clip",
        "X",
        "1.0",
        "Clip the gradient to this L2 norm (0 disables)",
    ),
    dflt(
        "max-len",
        "N",
        "50",
        "Skip training sentences longer than N words",
    ),
    dflt(
        "precision",
        "P",
        "single",
        "Floating-point precision: single or double",
    ),
    opt("target-accuracy", "X", "Stop once dev token accuracy reaches X"),
    dflt(
        "output",
        "FILE",
        "model.ck",
        "Checkpoint path; vocabularies are written next to it",
    ),
    opt(
        "metrics",
        "FILE",
        "Per-epoch metrics log [default: <output>.metrics.tsv]",
    ),
];

const DATA_FLAGS: [Flag; 12] = [
    opt("task", "KIND", "Synthetic task: copy, reverse or agreement"),
    dflt(
        "vocab-size",
        "N",
        "20",
        "Synthetic vocabulary size, or the maximum corpus vocabulary",
    ),
    dflt("min-len", "N", "2", "Shortest synthetic sentence"),
    dflt("task-max-len", "N", "10", "Longest synthetic sentence"),
    dflt("train-pairs", "N", "5000", "Synthetic training pairs"),
    dflt("dev-pairs", "N", "500", "Synthetic development pairs"),
    opt("data-seed", "N", "Seed for synthetic data [default: --seed]"),
    opt("train-src", "FILE", "Source side of the training corpus"),
    opt("train-tgt", "FILE", "Target side of the training corpus"),
    opt("dev-src", "FILE", "Source side of the development corpus"),
    opt("dev-tgt", "FILE", "Target side of the development corpus"),
    dflt(
        "corpus-vocab",
        "N",
        "25000",
        "Maximum vocabulary size built from a corpus",
    ),
];

pub const FLAGS: &[Flag] = &concat::<17, 12, 29>(MODEL_FLAGS, DATA_FLAGS);

pub fn variant(s: &Settings) -> CliResult<DecoderVariant> {
    let name: String = s.require("decoder")?;
    Ok(DecoderVariant::parse(&name, s.raw("scoring"))?)
}

pub fn precision(s: &Settings) -> CliResult<Precision> {
    let p: String = s.require("precision")?;
    Precision::parse(&p).ok_or_else(|| CliError::config(format!("unknown precision {p:?}")))
}

/// Reads every model/optimiser flag into a validated config.
pub fn train_config(s: &Settings, mode: Mode) -> CliResult<TrainConfig> {
    let cfg = TrainConfig {
        rho: s.require("rho")?,
        epsilon: s.require("epsilon")?,
        dropout_p: s.require("dropout")?,
        init_scale: s.require("init-scale")?,
        batch_size: s.require("batch-size")?,
        max_epochs: s.require("epochs")?,
        seed: s.require("seed")?,
        precision: precision(s)?,
        variant: variant(s)?,
        mode,
        embed_dim: s.require("embed-dim")?,
        hidden_dim: s.require("hidden-dim")?,
        max_len: s.require("max-len")?,
        clip_norm: s.require("clip")?,
        target_accuracy: s.get("target-accuracy")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

pub fn metrics_path(s: &Settings, output: &Path) -> PathBuf {
    s.path("metrics")
        .unwrap_or_else(|| sibling(output, ".metrics.tsv"))
}

fn report(m: &EpochMetrics) {
    eprintln!(
        "epoch {:>3}  train {:.4}  dev {:.4}  acc {:.4}",
        m.epoch, m.train_loss, m.dev_loss, m.dev_accuracy
    );
}

/// Trains in the configured precision and writes checkpoint and metrics.
/// Writes the effective settings to `<output>.conf`, replayable with `--config`.
pub fn save_settings(s: &Settings, output: &Path) -> CliResult {
    let path = sibling(output, ".conf");
    std::fs::write(&path, s.to_config()).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn fit_and_save(
    cfg: &TrainConfig,
    model: ModelConfig,
    train: &[SentencePair],
    dev: &[SentencePair],
    output: &Path,
    metrics: &Path,
) -> CliResult {
    fn go<T: Scalar>(
        cfg: &TrainConfig,
        model: ModelConfig,
        train: &[SentencePair],
        dev: &[SentencePair],
        out: TrainOutputs<'_>,
    ) -> CliResult<(usize, f64)> {
        let r = fit::<T>(cfg, model, train, dev, out, report)?;
        let best = r.metrics[r.best_epoch - 1];
        Ok((r.best_epoch, best.dev_loss))
    }
    let out = TrainOutputs {
        checkpoint: Some(output),
        metrics: Some(metrics),
    };
    let (epoch, loss) = match cfg.precision {
        Precision::Single => go::<f32>(cfg, model, train, dev, out)?,
        Precision::Double => go::<f64>(cfg, model, train, dev, out)?,
    };
    println!(
        "best epoch {epoch} (dev loss {loss:.4}); checkpoint {} metrics {}",
        output.display(),
        metrics.display()
    );
    Ok(())
}

pub fn run(s: &Settings) -> CliResult {
    let cfg = train_config(s, Mode::Translation)?;
    let output = s.require_path("output")?;
    let metrics = metrics_path(s, &output);
    let corpus = ["train-src", "train-tgt", "dev-src", "dev-tgt"];

    let (src_vocab, tgt_vocab, train, dev) = match s.raw("task") {
        Some(kind) => {
            if corpus.iter().any(|k| s.has(k)) {
                return Err(CliError::config("--task cannot be combined with corpus files"));
            }
            let kind =
                TaskKind::parse(kind).ok_or_else(|| CliError::config(format!("unknown task {kind:?}")))?;
            let v: usize = s.require("vocab-size")?;
            let range = (s.require("min-len")?, s.require("task-max-len")?);
            let seed = s.get("data-seed")?.unwrap_or(cfg.seed);
            let train: Vec<_> =
                make_synthetic_task(kind, v, range, s.require("train-pairs")?, seed)?.collect();
            let dev: Vec<_> =
                make_synthetic_dev_task(kind, v, range, s.require("dev-pairs")?, seed)?.collect();
            let vocab = Vocabulary::synthetic(v)?;
            (vocab.clone(), vocab, train, dev)
        }
        None => {
            if let Some(k) = corpus.iter().find(|k| !s.has(k)) {
                return Err(
                    CliError::config(format!("missing required --{k} (or give --task)"))
                        .with_usage(s.usage()),
                );
            }
            let paths = corpus
                .iter()
                .map(|k| s.require_path(k))
                .collect::<CliResult<Vec<_>>>()?;
            let max: usize = s.require("corpus-vocab")?;
            let sv = Vocabulary::build(read_lines(&paths[0])?, max)?;
            let tv = Vocabulary::build(read_lines(&paths[1])?, max)?;
            let train = load_parallel_corpus(&paths[0], &paths[1], &sv, &tv, cfg.max_len)?;
            let dev = load_parallel_corpus(&paths[2], &paths[3], &sv, &tv, usize::MAX)?;
            (sv, tv, train, dev)
        }
    };
    let model = cfg.model_config(src_vocab.len(), tgt_vocab.len())?;
    src_vocab.save(sibling(&output, ".src.vocab"))?;
    tgt_vocab.save(sibling(&output, ".tgt.vocab"))?;
    save_settings(s, &output)?;
    fit_and_save(&cfg, model, &train, &dev, &output, &metrics)
}
