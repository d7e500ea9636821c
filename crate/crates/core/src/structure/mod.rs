//! Binary trees from target-side attention, and PARSEVAL scoring.

use std::collections::BTreeSet;

use crate::data::GoldTree;
use crate::error::{Error, Result};
use crate::evaluation::argmax_recent;
use crate::inference::AttentionTrace;
use crate::model::TargetAttention;

/// 0/1 matrix over sentence positions: `(t, i)` is set when word `i` got the
/// maximal attention while word `t` was predicted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryAttentionMatrix {
    n: usize,
    /// Attended column of each row, if any.
    rows: Vec<Option<usize>>,
}

impl BinaryAttentionMatrix {
    /// Validates at most one entry per row and strict lower-triangularity.
    pub fn from_dense(m: &[Vec<u8>]) -> Result<Self> {
        let n = m.len();
        let mut rows = Vec::with_capacity(n);
        for (t, r) in m.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Contract(format!(
                    "row {t} has {} columns, expected {n}",
                    r.len()
                )));
            }
            let ones: Vec<usize> = (0..n).filter(|&i| r[i] != 0).collect();
            if r.iter().any(|&x| x > 1) || ones.len() > 1 || ones.iter().any(|&i| i >= t) {
                return Err(Error::Contract(format!(
                    "row {t} must hold at most one 1 strictly left of the diagonal"
                )));
            }
            rows.push(ones.first().copied());
        }
        Ok(BinaryAttentionMatrix { n, rows })
    }

    pub fn from_argmax(rows: Vec<Option<usize>>) -> Result<Self> {
        for (t, r) in rows.iter().enumerate() {
            if r.is_some_and(|i| i >= t) {
                return Err(Error::Contract(format!(
                    "row {t} points at column {}",
                    r.unwrap()
                )));
            }
        }
        Ok(BinaryAttentionMatrix { n: rows.len(), rows })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, t: usize, i: usize) -> bool {
        self.rows[t] == Some(i)
    }

    pub fn row(&self, t: usize) -> Option<usize> {
        self.rows[t]
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|t| (0..self.n).map(|i| self.get(t, i) as u8).collect())
            .collect()
    }

    /// Whether column `i` has a 1 in a row of the window `[lo, hi)`.
    fn column_used(&self, i: usize, lo: usize, hi: usize) -> bool {
        self.rows[lo..hi].contains(&Some(i))
    }
}

/// Marks, for every emitted word, the previous word with the largest
/// attention (ties to the most recent). BOS and the end-of-sentence step are
/// left out, so the matrix is indexed by the words of the output.
pub fn binarize_attention(trace: &AttentionTrace) -> Result<BinaryAttentionMatrix> {
    let kind = trace
        .target_kind
        .ok_or_else(|| Error::Contract("trace has no target-side attention".into()))?;
    let n = trace.words().len();
    if trace.target_attention.len() < n {
        return Err(Error::Contract(format!(
            "{} target rows for {n} words",
            trace.target_attention.len()
        )));
    }
    let rows = (0..n)
        .map(|t| {
            let row = &trace.target_attention[t];
            let words = match kind {
                TargetAttention::Embeddings => row.get(1..).unwrap_or(&[]),
                TargetAttention::Hiddens => row.as_slice(),
            };
            if words.len() != t {
                return Err(Error::Contract(format!(
                    "target row {t} covers {} previous words",
                    words.len()
                )));
            }
            Ok(argmax_recent(words))
        })
        .collect::<Result<Vec<_>>>()?;
    BinaryAttentionMatrix::from_argmax(rows)
}

/// Binary bracketing over word positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinaryTree {
    /// Words `[start, end)`, unsplit.
    Leaf {
        start: usize,
        end: usize,
    },
    Node(Box<BinaryTree>, Box<BinaryTree>),
}

impl BinaryTree {
    pub fn span(&self) -> (usize, usize) {
        match self {
            BinaryTree::Leaf { start, end } => (*start, *end),
            BinaryTree::Node(l, r) => (l.span().0, r.span().1),
        }
    }

    /// Every bracket of the tree (leaves included).
    pub fn spans(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<(usize, usize)>) {
        out.insert(self.span());
        if let BinaryTree::Node(l, r) = self {
            l.collect(out);
            r.collect(out);
        }
    }

    /// Brackets covering at least two words.
    pub fn constituents(&self) -> BTreeSet<(usize, usize)> {
        self.spans().into_iter().filter(|(a, b)| b - a >= 2).collect()
    }

    pub fn leaves(&self) -> Vec<(usize, usize)> {
        match self {
            BinaryTree::Leaf { start, end } => vec![(*start, *end)],
            BinaryTree::Node(l, r) => {
                let mut v = l.leaves();
                v.extend(r.leaves());
                v
            }
        }
    }

    /// Bracketed rendering with bare words as single-word leaves, e.g.
    /// `(a (b (c d)))`. A lone word is still wrapped: `(a)`.
    pub fn render<S: AsRef<str>>(&self, words: &[S]) -> String {
        match self {
            BinaryTree::Leaf { start, end } if end - start == 1 => {
                format!("({})", words[*start].as_ref())
            }
            _ => self.render_inner(words),
        }
    }

    fn render_inner<S: AsRef<str>>(&self, words: &[S]) -> String {
        match self {
            BinaryTree::Leaf { start, end } if end - start == 1 => words[*start].as_ref().to_string(),
            BinaryTree::Leaf { start, end } => {
                let inner: Vec<&str> = words[*start..*end].iter().map(|w| w.as_ref()).collect();
                format!("({})", inner.join(" "))
            }
            BinaryTree::Node(l, r) => {
                format!("({} {})", l.render_inner(words), r.render_inner(words))
            }
        }
    }
}

/// Splits the segment in front of the first later-attended column: the scan
/// starts at 1 and runs while column `i` is unattended within the segment.
fn split(a: &BinaryAttentionMatrix, lo: usize, hi: usize) -> BinaryTree {
    let n = hi - lo;
    let mut i = 1;
    while i < n && !a.column_used(lo + i, lo, hi) {
        i += 1;
    }
    if i >= n {
        return BinaryTree::Leaf { start: lo, end: hi };
    }
    BinaryTree::Node(
        Box::new(BinaryTree::Leaf {
            start: lo,
            end: lo + i,
        }),
        Box::new(split(a, lo + i, hi)),
    )
}

/// Tree extraction from a binarized attention matrix over `sentence`.
pub fn build_tree<S>(a: &BinaryAttentionMatrix, sentence: &[S]) -> Result<BinaryTree> {
    if sentence.is_empty() {
        return Err(Error::Contract(
            "cannot build a tree over an empty sentence".into(),
        ));
    }
    if a.len() != sentence.len() {
        return Err(Error::Contract(format!(
            "{}x{} attention matrix for a {}-word sentence",
            a.len(),
            a.len(),
            sentence.len()
        )));
    }
    Ok(split(a, 0, sentence.len()))
}

/// `(w0 (w1 (w2 ...)))`.
pub fn right_branching_tree(n: usize) -> Result<BinaryTree> {
    if n == 0 {
        return Err(Error::Input(
            "right-branching tree needs at least one word".into(),
        ));
    }
    let mut tree = BinaryTree::Leaf { start: n - 1, end: n };
    for i in (0..n - 1).rev() {
        tree = BinaryTree::Node(
            Box::new(BinaryTree::Leaf { start: i, end: i + 1 }),
            Box::new(tree),
        );
    }
    Ok(tree)
}

/// Multi-word bracket agreement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parseval {
    pub precision: f64,
    pub recall: f64,
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Parseval {
    /// Corpus-level scores from summed counts.
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Parseval {
            precision: ratio(matched, predicted),
            recall: ratio(matched, gold),
            matched,
            predicted,
            gold,
        }
    }
}

/// Span-set comparison of constituents covering two or more words.
pub fn parseval_spans(predicted: &BTreeSet<(usize, usize)>, gold: &BTreeSet<(usize, usize)>) -> Parseval {
    let p: BTreeSet<_> = predicted.iter().filter(|(a, b)| b - a >= 2).collect();
    let g: BTreeSet<_> = gold.iter().filter(|(a, b)| b - a >= 2).collect();
    Parseval::from_counts(p.intersection(&g).count(), p.len(), g.len())
}

pub fn parseval(predicted: &BinaryTree, gold: &GoldTree) -> Result<Parseval> {
    let n = predicted.span().1;
    if n != gold.words.len() {
        return Err(Error::Input(format!(
            "predicted tree covers {n} words, gold tree {}",
            gold.words.len()
        )));
    }
    Ok(parseval_spans(&predicted.spans(), &gold.spans))
}
