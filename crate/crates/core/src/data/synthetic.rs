//! Desk-scale synthetic translation tasks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

use super::{SentencePair, BOS, EOS, RESERVED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    /// Target reproduces the source.
    Copy,
    /// Target is the source reversed.
    Reverse,
    /// Source opens with a marker; the target copies the source and then
    /// emits the marker's partner token, a dependency spanning the sentence.
    Agreement,
}

impl TaskKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "copy" => Some(TaskKind::Copy),
            "reverse" => Some(TaskKind::Reverse),
            "agreement" => Some(TaskKind::Agreement),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Copy => "copy",
            TaskKind::Reverse => "reverse",
            TaskKind::Agreement => "agreement",
        }
    }
}

/// Deterministic stream of synthetic sentence pairs.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    kind: TaskKind,
    vocab_size: usize,
    min_len: usize,
    max_len: usize,
    remaining: usize,
    rng: ChaCha8Rng,
}

/// Creates a pair generator. Content tokens are ids `4..vocab_size`.
pub fn make_synthetic_task(
    kind: TaskKind,
    vocab_size: usize,
    length_range: (usize, usize),
    n_pairs: usize,
    seed: u64,
) -> Result<SyntheticTask> {
    generator(kind, vocab_size, length_range, n_pairs, seed, Stream::Data)
}

/// Like [`make_synthetic_task`] but drawing from a separate stream, so a
/// development set made with the training seed is independent of it.
pub fn make_synthetic_dev_task(
    kind: TaskKind,
    vocab_size: usize,
    length_range: (usize, usize),
    n_pairs: usize,
    seed: u64,
) -> Result<SyntheticTask> {
    generator(kind, vocab_size, length_range, n_pairs, seed, Stream::DevData)
}

fn generator(
    kind: TaskKind,
    vocab_size: usize,
    length_range: (usize, usize),
    n_pairs: usize,
    seed: u64,
    which: Stream,
) -> Result<SyntheticTask> {
    let (min_len, max_len) = length_range;
    if vocab_size < 6 {
        return Err(Error::Input(format!("synthetic vocabulary {vocab_size} < 6")));
    }
    if min_len < 2 || max_len < min_len {
        return Err(Error::Input(format!(
            "invalid length range ({min_len}, {max_len}); need 2 <= min <= max"
        )));
    }
    Ok(SyntheticTask {
        kind,
        vocab_size,
        min_len,
        max_len,
        remaining: n_pairs,
        rng: stream(seed, which),
    })
}

impl SyntheticTask {
    fn n_content(&self) -> usize {
        self.vocab_size - RESERVED.len()
    }

    /// Number of marker/partner pairs used by the agreement task.
    pub fn n_markers(&self) -> usize {
        (self.n_content() / 5).max(1)
    }

    /// Agreement markers (ids `4..4+P`).
    pub fn markers(&self) -> Vec<usize> {
        (0..self.n_markers()).map(|i| RESERVED.len() + i).collect()
    }

    /// Token the agreement target must end with for a given marker.
    pub fn partner(&self, marker: usize) -> Option<usize> {
        let first = RESERVED.len();
        let p = self.n_markers();
        (first..first + p).contains(&marker).then(|| marker + p)
    }

    fn sample(&mut self) -> SentencePair {
        let len = self.rng.random_range(self.min_len..=self.max_len);
        let first = RESERVED.len();
        let words: Vec<usize> = match self.kind {
            TaskKind::Copy | TaskKind::Reverse => (0..len)
                .map(|_| self.rng.random_range(first..self.vocab_size))
                .collect(),
            TaskKind::Agreement => {
                let p = self.n_markers();
                let marker = self.rng.random_range(first..first + p);
                std::iter::once(marker)
                    .chain((1..len).map(|_| self.rng.random_range(first + p..self.vocab_size)))
                    .collect()
            }
        };
        let body: Vec<usize> = match self.kind {
            TaskKind::Copy => words.clone(),
            TaskKind::Reverse => words.iter().rev().copied().collect(),
            TaskKind::Agreement => {
                let partner = self.partner(words[0]).expect("first word is a marker");
                words.iter().copied().chain(std::iter::once(partner)).collect()
            }
        };
        let mut source = words;
        source.push(EOS);
        let mut target = Vec::with_capacity(body.len() + 2);
        target.push(BOS);
        target.extend(body);
        target.push(EOS);
        SentencePair { source, target }
    }
}

impl Iterator for SyntheticTask {
    type Item = SentencePair;

    fn next(&mut self) -> Option<SentencePair> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(self.sample())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copy_and_reverse_contracts() {
        for kind in [TaskKind::Copy, TaskKind::Reverse] {
            for pair in make_synthetic_task(kind, 20, (2, 9), 200, 3).unwrap() {
                let src = pair.source_words();
                let tgt = pair.target_words();
                assert_eq!(*pair.source.last().unwrap(), EOS);
                assert_eq!(pair.target[0], BOS);
                assert!((2..=9).contains(&src.len()));
                match kind {
                    TaskKind::Copy => assert_eq!(src, tgt),
                    _ => assert_eq!(src.iter().rev().copied().collect::<Vec<_>>(), tgt),
                }
                assert!(src.iter().all(|&t| (4..20).contains(&t)));
            }
        }
    }

    #[test]
    fn agreement_target_ends_with_partner() {
        let task = make_synthetic_task(TaskKind::Agreement, 24, (4, 12), 0, 1).unwrap();
        let markers = task.markers();
        assert_eq!(markers, vec![4, 5, 6, 7]);
        for pair in make_synthetic_task(TaskKind::Agreement, 24, (4, 12), 300, 9).unwrap() {
            let m = pair.source[0];
            assert!(markers.contains(&m));
            assert!(pair.source_words()[1..].iter().all(|t| !markers.contains(t)));
            let tgt = pair.target_words();
            assert_eq!(*tgt.last().unwrap(), task.partner(m).unwrap());
            assert_eq!(&tgt[..tgt.len() - 1], pair.source_words());
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<_> = make_synthetic_task(TaskKind::Agreement, 12, (2, 7), 50, 5)
            .unwrap()
            .collect();
        let b: Vec<_> = make_synthetic_task(TaskKind::Agreement, 12, (2, 7), 50, 5)
            .unwrap()
            .collect();
        let c: Vec<_> = make_synthetic_task(TaskKind::Agreement, 12, (2, 7), 50, 6)
            .unwrap()
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configurations() {
        assert!(make_synthetic_task(TaskKind::Copy, 5, (2, 3), 1, 0).is_err());
        assert!(make_synthetic_task(TaskKind::Copy, 10, (1, 3), 1, 0).is_err());
        assert!(make_synthetic_task(TaskKind::Copy, 10, (4, 3), 1, 0).is_err());
    }

    #[test]
    fn smallest_agreement_vocabulary_still_has_fillers() {
        let pairs: Vec<_> = make_synthetic_task(TaskKind::Agreement, 6, (3, 3), 10, 0)
            .unwrap()
            .collect();
        for p in pairs {
            assert_eq!(p.source[0], 4);
            assert_eq!(p.target_words().last(), Some(&5));
        }
    }
}
