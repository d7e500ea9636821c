use std::fs;
use std::io::Write;
use std::path::Path;

use arsq::data::{read_lines, Vocabulary, EOS};
use arsq::inference::{decode_all, DecodeOptions, TraceFile};
use arsq::model::{DecoderVariant, Mode, ModelConfig, ModelParams};
use arsq::training::{load_checkpoint, read_checkpoint_header};
use arsq::{Precision, Scalar};

use crate::settings::{dflt, opt, Flag, Settings};
use crate::train::sibling;
use crate::{CliError, CliResult};

pub const FLAGS: &[Flag] = &[
    opt("model", "FILE", "Checkpoint written by train"),
    opt("input", "FILE", "Source sentences, one per line"),
    opt(
        "output",
        "FILE",
        "Write hypotheses here instead of standard output",
    ),
    dflt("beam", "K", "4", "Beam width (1 = greedy)"),
    dflt("max-len", "N", "100", "Longest output in tokens"),
    dflt(
        "length-norm",
        "X",
        "1.0",
        "Finished hypotheses are ranked by logp / len^X",
    ),
    opt("dump-attn", "FILE", "Write attention traces here"),
    dflt("workers", "N", "1", "Decode sentences on N threads"),
    opt(
        "decoder",
        "NAME",
        "Expected decoder variant (must match the checkpoint)",
    ),
    opt(
        "scoring",
        "NAME",
        "Expected scoring function (must match the checkpoint)",
    ),
    opt(
        "embed-dim",
        "N",
        "Expected embedding size (must match the checkpoint)",
    ),
    opt(
        "hidden-dim",
        "N",
        "Expected hidden size (must match the checkpoint)",
    ),
];

/// Rejects flags that disagree with what the checkpoint declares.
pub fn check_overrides(s: &Settings, cfg: &ModelConfig) -> CliResult {
    if let Some(name) = s.raw("decoder") {
        let v = DecoderVariant::parse(name, s.raw("scoring"))?;
        if v != cfg.variant {
            return Err(CliError::config(format!(
                "--decoder {v} does not match the checkpoint's {}",
                cfg.variant
            )));
        }
    } else if let Some(sc) = s.raw("scoring") {
        if cfg.variant.scoring().map(|x| x.name()) != Some(sc) {
            return Err(CliError::config(format!(
                "--scoring {sc} does not match the checkpoint's {}",
                cfg.variant
            )));
        }
    }
    for (flag, have) in [("embed-dim", cfg.embed_dim), ("hidden-dim", cfg.hidden_dim)] {
        if let Some(want) = s.get::<usize>(flag)? {
            if want != have {
                return Err(CliError::config(format!(
                    "--{flag} {want} does not match the checkpoint's {have}"
                )));
            }
        }
    }
    Ok(())
}

pub fn load_vocab(model: &Path, suffix: &str) -> CliResult<Vocabulary> {
    Ok(Vocabulary::load(sibling(model, suffix))?)
}

fn decode<T: Scalar>(
    s: &Settings,
    model: &Path,
    sources: &[Vec<usize>],
    tgt: &Vocabulary,
) -> CliResult<(Vec<String>, Option<TraceFile>)> {
    let params: ModelParams<T> = load_checkpoint(model)?;
    let opts = DecodeOptions {
        beam: s.require("beam")?,
        max_len: s.require("max-len")?,
        length_norm: s.require("length-norm")?,
    };
    if opts.beam == 0 || opts.max_len == 0 {
        return Err(CliError::config("--beam and --max-len must be at least 1"));
    }
    let workers: usize = s.require("workers")?;
    let hyps = decode_all(&params, sources, opts, workers)?;
    let lines = hyps.iter().map(|h| tgt.decode(&h.tokens)).collect();
    let traces = s.has("dump-attn").then(|| TraceFile {
        variant: params.config().variant.name().to_string(),
        target_kind: params.config().variant.target_attention(),
        traces: hyps.iter().map(|h| h.trace(&params, tgt)).collect(),
    });
    Ok((lines, traces))
}

pub fn run(s: &Settings) -> CliResult {
    let model = s.require_path("model")?;
    let input = s.require_path("input")?;
    let header = read_checkpoint_header(&model)?;
    if header.config.mode != Mode::Translation {
        return Err(CliError::config(
            "translate needs a translation checkpoint, not a language model",
        ));
    }
    check_overrides(s, &header.config)?;
    let sv = load_vocab(&model, ".src.vocab")?;
    let tv = load_vocab(&model, ".tgt.vocab")?;
    if sv.len() != header.config.src_vocab || tv.len() != header.config.tgt_vocab {
        return Err(CliError::config("vocabulary files do not match the checkpoint"));
    }
    let sources: Vec<Vec<usize>> = read_lines(&input)?
        .iter()
        .map(|l| {
            let mut ids = sv.encode(l);
            ids.push(EOS);
            ids
        })
        .collect();
    let (lines, traces) = match header.precision {
        Precision::Single => decode::<f32>(s, &model, &sources, &tv)?,
        Precision::Double => decode::<f64>(s, &model, &sources, &tv)?,
    };
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    match s.path("output") {
        Some(p) => fs::write(&p, text).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(format!("stdout: {e}")))?,
    }
    if let (Some(t), Some(p)) = (traces, s.path("dump-attn")) {
        t.write(&p)?;
    }
    Ok(())
}
