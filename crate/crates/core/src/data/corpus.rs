use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{SentencePair, Vocabulary, BOS, EOS};

pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .collect())
}

/// Encodes one aligned sentence pair; `None` when either side is empty or
/// longer than `max_len` words.
pub fn encode_pair(
    src: &str,
    tgt: &str,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    max_len: usize,
) -> Option<SentencePair> {
    let s = src_vocab.encode(src);
    let t = tgt_vocab.encode(tgt);
    if s.is_empty() || t.is_empty() || s.len() > max_len || t.len() > max_len {
        return None;
    }
    let mut source = s;
    source.push(EOS);
    let mut target = Vec::with_capacity(t.len() + 2);
    target.push(BOS);
    target.extend(t);
    target.push(EOS);
    Some(SentencePair { source, target })
}

/// Reads two line-aligned UTF-8 files. Pairs violating the length limit are
/// skipped.
pub fn load_parallel_corpus(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<SentencePair>> {
    let src = read_lines(&src_path)?;
    let tgt = read_lines(&tgt_path)?;
    if src.len() != tgt.len() {
        return Err(Error::Input(format!(
            "{} has {} lines but {} has {}",
            src_path.as_ref().display(),
            src.len(),
            tgt_path.as_ref().display(),
            tgt.len()
        )));
    }
    Ok(src
        .iter()
        .zip(&tgt)
        .filter_map(|(s, t)| encode_pair(s, t, src_vocab, tgt_vocab, max_len))
        .collect())
}

/// Reads a monolingual corpus as `BOS w.. EOS` sequences for language
/// modelling, skipping empty and over-long lines.
pub fn load_lm_corpus(path: impl AsRef<Path>, vocab: &Vocabulary, max_len: usize) -> Result<Vec<Vec<usize>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| vocab.encode(l))
        .filter(|w| !w.is_empty() && w.len() <= max_len)
        .map(|w| {
            let mut seq = vec![BOS];
            seq.extend(w);
            seq.push(EOS);
            seq
        })
        .collect())
}
