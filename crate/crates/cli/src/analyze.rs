use std::fs;
use std::io::Write;
use std::path::Path;

use arsq::data::{load_gold_trees, load_lm_corpus, read_lines, SentencePair, TreeSyntax, EOS};
use arsq::evaluation::{bleu as corpus_bleu, max_attention_histogram, perplexity, teacher_forced};
use arsq::inference::TraceFile;
use arsq::model::{Mode, ModelParams};
use arsq::structure::{binarize_attention, build_tree, parseval_spans, right_branching_tree, Parseval};
use arsq::training::{load_checkpoint, read_checkpoint_header};
use arsq::{Precision, Scalar};

use crate::settings::{dflt, opt, switch, Flag, Settings};
use crate::translate::load_vocab;
use crate::{CliError, CliResult};

pub const HIST_FLAGS: &[Flag] = &[
    opt("traces", "FILE", "Trace file written by translate --dump-attn"),
    opt(
        "output",
        "FILE",
        "Write the histogram here instead of standard output",
    ),
];

pub const TREE_FLAGS: &[Flag] = &[
    opt("traces", "FILE", "Trace file written by translate --dump-attn"),
    opt("output", "FILE", "Write trees here instead of standard output"),
    switch(
        "right-branching",
        "Emit right-branching trees over the same sentences instead",
    ),
];

pub const PARSEVAL_FLAGS: &[Flag] = &[
    opt("pred", "FILE", "Predicted trees, one per line"),
    opt("gold", "FILE", "Gold trees, one per line"),
    switch(
        "labeled-gold",
        "Gold brackets start with a constituent label, as in (NP (DT the) (NN cat))",
    ),
];

pub const BLEU_FLAGS: &[Flag] = &[
    opt("hyp", "FILE", "Hypotheses, one tokenised sentence per line"),
    opt("ref", "FILE", "References, line-aligned with --hyp"),
];

pub const PPL_FLAGS: &[Flag] = &[
    opt("model", "FILE", "Checkpoint (translation or language model)"),
    opt("input", "FILE", "Language-model text, one sentence per line"),
    opt("source", "FILE", "Source sentences (translation models)"),
    opt("target", "FILE", "Reference translations (translation models)"),
    dflt("batch-size", "N", "32", "Sentences per evaluation batch"),
];

fn emit(s: &Settings, text: &str) -> CliResult {
    match s.path("output") {
        Some(p) => fs::write(&p, text).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(format!("stdout: {e}"))),
    }
}

pub fn hist(s: &Settings) -> CliResult {
    let traces = TraceFile::read(&s.require_path("traces")?)?;
    let h = max_attention_histogram(&traces.traces)?;
    emit(s, &h.to_tsv())
}

pub fn tree(s: &Settings) -> CliResult {
    let traces = TraceFile::read(&s.require_path("traces")?)?;
    let right = s.flag("right-branching")?;
    let mut out = String::new();
    for (i, t) in traces.traces.iter().enumerate() {
        let words = t.words();
        if words.is_empty() {
            return Err(CliError::config(format!("sentence {i} has no words to bracket")));
        }
        let tree = if right {
            right_branching_tree(words.len())?
        } else {
            build_tree(&binarize_attention(t)?, words)?
        };
        out.push_str(&tree.render(words));
        out.push('\n');
    }
    emit(s, &out)
}

pub fn parseval(s: &Settings) -> CliResult {
    let pred = load_gold_trees(s.require_path("pred")?, TreeSyntax::Unlabeled)?;
    let syntax = if s.flag("labeled-gold")? {
        TreeSyntax::Labeled
    } else {
        TreeSyntax::Unlabeled
    };
    let gold = load_gold_trees(s.require_path("gold")?, syntax)?;
    if pred.len() != gold.len() {
        return Err(CliError::config(format!(
            "{} predicted trees for {} gold trees",
            pred.len(),
            gold.len()
        )));
    }
    let (mut matched, mut predicted, mut total) = (0, 0, 0);
    for (i, (p, g)) in pred.iter().zip(&gold).enumerate() {
        if p.words.len() != g.words.len() {
            return Err(CliError::config(format!(
                "tree {i}: {} predicted words, {} gold words",
                p.words.len(),
                g.words.len()
            )));
        }
        let r = parseval_spans(&p.spans, &g.spans);
        matched += r.matched;
        predicted += r.predicted;
        total += r.gold;
    }
    let r = Parseval::from_counts(matched, predicted, total);
    println!("precision={:.6} recall={:.6}", r.precision, r.recall);
    Ok(())
}

fn tokenised(path: &Path) -> CliResult<Vec<Vec<String>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect())
}

pub fn bleu(s: &Settings) -> CliResult {
    let hyp = tokenised(&s.require_path("hyp")?)?;
    let refs = tokenised(&s.require_path("ref")?)?;
    let r = corpus_bleu(&hyp, &refs)?;
    println!(
        "BLEU={:.4} p1={:.4} p2={:.4} p3={:.4} p4={:.4} BP={:.4} hyp_len={} ref_len={}",
        r.bleu,
        r.precisions[0],
        r.precisions[1],
        r.precisions[2],
        r.precisions[3],
        r.brevity_penalty,
        r.hyp_len,
        r.ref_len
    );
    Ok(())
}

/// Perplexity of whichever kind of model the checkpoint holds.
pub fn model_perplexity(s: &Settings) -> CliResult<f64> {
    fn go<T: Scalar>(s: &Settings, model: &Path, mode: Mode) -> CliResult<f64> {
        let params: ModelParams<T> = load_checkpoint(model)?;
        let bs: usize = s.require("batch-size")?;
        match mode {
            Mode::LanguageModel => {
                let vocab = load_vocab(model, ".tgt.vocab")?;
                let corpus = load_lm_corpus(s.require_path("input")?, &vocab, usize::MAX)?;
                Ok(perplexity(&params, &corpus, bs)?)
            }
            Mode::Translation => {
                let sv = load_vocab(model, ".src.vocab")?;
                let tv = load_vocab(model, ".tgt.vocab")?;
                let src = read_lines(s.require_path("source")?)?;
                let tgt = read_lines(s.require_path("target")?)?;
                if src.len() != tgt.len() {
                    return Err(CliError::config("--source and --target differ in length"));
                }
                let pairs: Vec<SentencePair> = src
                    .iter()
                    .zip(&tgt)
                    .map(|(a, b)| {
                        let mut source = sv.encode(a);
                        source.push(EOS);
                        let mut target = vec![arsq::data::BOS];
                        target.extend(tv.encode(b));
                        target.push(EOS);
                        SentencePair { source, target }
                    })
                    .collect();
                Ok(teacher_forced(&params, &pairs, bs)?.perplexity())
            }
        }
    }
    let model = s.require_path("model")?;
    let header = read_checkpoint_header(&model)?;
    match header.precision {
        Precision::Single => go::<f32>(s, &model, header.config.mode),
        Precision::Double => go::<f64>(s, &model, header.config.mode),
    }
}

pub fn ppl(s: &Settings) -> CliResult {
    println!("perplexity={:.6}", model_perplexity(s)?);
    Ok(())
}
