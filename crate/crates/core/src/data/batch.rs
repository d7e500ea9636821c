use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

use super::{SentencePair, PAD};

/// Padded mini-batch. All matrices are row-major `[size, len]`.
///
/// The decoder reads `tgt_in` (BOS..last word) and is scored on `tgt_out`
/// (first word..EOS); masks are true exactly where the token is not PAD.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub src_len: usize,
    pub src: Vec<usize>,
    pub src_mask: Vec<bool>,
    pub tgt_len: usize,
    pub tgt_in: Vec<usize>,
    pub tgt_out: Vec<usize>,
    pub tgt_mask: Vec<bool>,
    /// Position of each row in the list the batch was cut from.
    pub indices: Vec<usize>,
}

fn pad_rows(rows: &[&[usize]]) -> (usize, Vec<usize>, Vec<bool>) {
    let len = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut ids = Vec::with_capacity(rows.len() * len);
    let mut mask = Vec::with_capacity(rows.len() * len);
    for r in rows {
        ids.extend_from_slice(r);
        ids.extend(std::iter::repeat_n(PAD, len - r.len()));
        mask.extend(r.iter().map(|&t| t != PAD));
        mask.extend(std::iter::repeat_n(false, len - r.len()));
    }
    (len, ids, mask)
}

impl Batch {
    pub fn from_pairs(pairs: &[&SentencePair], indices: Vec<usize>) -> Self {
        let srcs: Vec<&[usize]> = pairs.iter().map(|p| p.source.as_slice()).collect();
        let targets: Vec<&[usize]> = pairs.iter().map(|p| p.target.as_slice()).collect();
        Self::assemble(&srcs, &targets, indices)
    }

    /// Target-only batch for language modelling; the source part is empty.
    pub fn from_targets(targets: &[&[usize]], indices: Vec<usize>) -> Self {
        Self::assemble(&[], targets, indices)
    }

    fn assemble(srcs: &[&[usize]], targets: &[&[usize]], indices: Vec<usize>) -> Self {
        let (src_len, src, src_mask) = pad_rows(srcs);
        let ins: Vec<&[usize]> = targets.iter().map(|t| &t[..t.len() - 1]).collect();
        let outs: Vec<&[usize]> = targets.iter().map(|t| &t[1..]).collect();
        let (tgt_len, tgt_in, _) = pad_rows(&ins);
        let (_, tgt_out, tgt_mask) = pad_rows(&outs);
        Batch {
            size: targets.len(),
            src_len,
            src,
            src_mask,
            tgt_len,
            tgt_in,
            tgt_out,
            tgt_mask,
            indices,
        }
    }

    /// Column `t` of the decoder input.
    pub fn prev_tokens(&self, t: usize) -> Vec<usize> {
        (0..self.size)
            .map(|b| self.tgt_in[b * self.tgt_len + t])
            .collect()
    }

    pub fn gold_tokens(&self, t: usize) -> Vec<usize> {
        (0..self.size)
            .map(|b| self.tgt_out[b * self.tgt_len + t])
            .collect()
    }

    pub fn gold_mask(&self, t: usize) -> Vec<bool> {
        (0..self.size)
            .map(|b| self.tgt_mask[b * self.tgt_len + t])
            .collect()
    }

    pub fn src_column(&self, i: usize) -> Vec<usize> {
        (0..self.size).map(|b| self.src[b * self.src_len + i]).collect()
    }

    pub fn src_mask_column(&self, i: usize) -> Vec<bool> {
        (0..self.size)
            .map(|b| self.src_mask[b * self.src_len + i])
            .collect()
    }

    pub fn n_tokens(&self) -> usize {
        self.tgt_mask.iter().filter(|&&m| m).count()
    }
}

/// Cuts a pair list into batches, reshuffling with a seeded stream each epoch.
#[derive(Debug, Clone)]
pub struct Batcher<'a> {
    pairs: &'a [SentencePair],
    batch_size: usize,
    order: Vec<usize>,
    rng: ChaCha8Rng,
}

impl<'a> Batcher<'a> {
    pub fn new(pairs: &'a [SentencePair], batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Input("batch size must be at least 1".into()));
        }
        Ok(Batcher {
            pairs,
            batch_size,
            order: (0..pairs.len()).collect(),
            rng: stream(seed, Stream::Shuffle),
        })
    }

    /// Batches for one epoch in a fresh random order.
    pub fn epoch(&mut self) -> Vec<Batch> {
        self.order.shuffle(&mut self.rng);
        self.cut()
    }

    /// Batches in corpus order (no shuffling).
    pub fn in_order(pairs: &'a [SentencePair], batch_size: usize) -> Result<Vec<Batch>> {
        let b = Self::new(pairs, batch_size, 0)?;
        Ok(b.cut())
    }

    fn cut(&self) -> Vec<Batch> {
        self.order
            .chunks(self.batch_size)
            .map(|idx| {
                let rows: Vec<&SentencePair> = idx.iter().map(|&i| &self.pairs[i]).collect();
                Batch::from_pairs(&rows, idx.to_vec())
            })
            .collect()
    }
}
