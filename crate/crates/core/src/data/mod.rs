//! Corpora, vocabularies, batching, synthetic tasks and gold trees.

mod batch;
mod corpus;
mod gold;
mod synthetic;
mod vocab;

pub use batch::{Batch, Batcher};
pub use corpus::{encode_pair, load_lm_corpus, load_parallel_corpus, read_lines};
pub use gold::{load_gold_trees, parse_tree_line, GoldTree, TreeSyntax};
pub use synthetic::{make_synthetic_dev_task, make_synthetic_task, SyntheticTask, TaskKind};
pub use vocab::{Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

/// One aligned training example, as token ids.
///
/// `source` ends with EOS; `target` starts with BOS and ends with EOS.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentencePair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

impl SentencePair {
    /// Target tokens between BOS and EOS.
    pub fn target_words(&self) -> &[usize] {
        let end = self.target.len().saturating_sub(1);
        &self.target[1.min(end)..end]
    }

    /// Source tokens before EOS.
    pub fn source_words(&self) -> &[usize] {
        &self.source[..self.source.len().saturating_sub(1)]
    }
}
