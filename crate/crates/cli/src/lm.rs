use arsq::data::{load_lm_corpus, read_lines, SentencePair, Vocabulary};
use arsq::model::Mode;

use crate::analyze::model_perplexity;
use crate::settings::{concat, dflt, opt, Flag, Settings};
use crate::train::{fit_and_save, metrics_path, save_settings, sibling, train_config, MODEL_FLAGS};
use crate::{CliError, CliResult};

const DATA_FLAGS: [Flag; 3] = [
    opt("train", "FILE", "Training text, one sentence per line"),
    opt("dev", "FILE", "Development text, one sentence per line"),
    dflt("corpus-vocab", "N", "25000", "Maximum vocabulary size"),
];

pub const TRAIN_FLAGS: &[Flag] = &concat::<17, 3, 20>(MODEL_FLAGS, DATA_FLAGS);

pub const PPL_FLAGS: &[Flag] = &[
    opt("model", "FILE", "Language-model checkpoint written by lm train"),
    opt("input", "FILE", "Text, one sentence per line"),
    dflt("batch-size", "N", "32", "Sentences per evaluation batch"),
];

fn as_pairs(corpus: Vec<Vec<usize>>) -> Vec<SentencePair> {
    corpus
        .into_iter()
        .map(|target| SentencePair {
            source: Vec::new(),
            target,
        })
        .collect()
}

pub fn train(s: &Settings) -> CliResult {
    let cfg = train_config(s, Mode::LanguageModel)?;
    let output = s.require_path("output")?;
    let metrics = metrics_path(s, &output);
    let train_path = s.require_path("train")?;
    let dev_path = s.require_path("dev")?;
    let vocab = Vocabulary::build(read_lines(&train_path)?, s.require("corpus-vocab")?)?;
    let train = as_pairs(load_lm_corpus(&train_path, &vocab, cfg.max_len)?);
    let dev = as_pairs(load_lm_corpus(&dev_path, &vocab, usize::MAX)?);
    let model = cfg.model_config(0, vocab.len())?;
    vocab.save(sibling(&output, ".tgt.vocab"))?;
    save_settings(s, &output)?;
    fit_and_save(&cfg, model, &train, &dev, &output, &metrics)
}

pub fn ppl(s: &Settings) -> CliResult {
    let header = arsq::training::read_checkpoint_header(&s.require_path("model")?)?;
    if header.config.mode != Mode::LanguageModel {
        return Err(CliError::config("lm ppl needs a language-model checkpoint"));
    }
    println!("perplexity={:.6}", model_perplexity(s)?);
    Ok(())
}
