//! Bracketed constituency trees read from text.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

use super::read_lines;

/// How bare tokens directly after `(` are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreeSyntax {
    /// Every bare token is a word: `((a b) (c d))`.
    #[default]
    Unlabeled,
    /// Penn-style: the first bare token of each bracket is a label, and a
    /// `(TAG word)` bracket is a single word.
    Labeled,
}

/// A reference tree: its words and every bracketed span, end-exclusive.
/// Single-word spans are kept here and dropped only when scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldTree {
    pub words: Vec<String>,
    pub spans: BTreeSet<(usize, usize)>,
}

impl GoldTree {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Spans covering two or more words.
    pub fn constituents(&self) -> BTreeSet<(usize, usize)> {
        self.spans.iter().copied().filter(|(a, b)| b - a >= 2).collect()
    }
}

#[derive(Debug, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Word(&'a str),
}

fn lex(line: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match ch {
            '(' | ')' => {
                if let Some(s) = start.take() {
                    out.push(Tok::Word(&line[s..i]));
                }
                out.push(if ch == '(' { Tok::Open } else { Tok::Close });
            }
            c if c.is_whitespace() => {
                if let Some(s) = start.take() {
                    out.push(Tok::Word(&line[s..i]));
                }
            }
            _ => {
                if start.is_none() {
                    start = Some(i);
                }
            }
        }
    }
    if let Some(s) = start {
        out.push(Tok::Word(&line[s..]));
    }
    out
}

/// Parses one bracketed tree; `line_no` is used in error messages.
pub fn parse_tree_line(line: &str, syntax: TreeSyntax, line_no: usize) -> Result<GoldTree> {
    let err = |msg: &str| Error::Parse {
        line: line_no,
        msg: msg.to_string(),
    };
    let toks = lex(line);
    if toks.first() != Some(&Tok::Open) {
        return Err(err("tree must start with '('"));
    }
    let mut words = Vec::new();
    let mut spans = BTreeSet::new();
    // (start word index, tokens seen inside this bracket)
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut closed_root = false;
    for tok in toks {
        if closed_root {
            return Err(err("text after the closing parenthesis of the tree"));
        }
        match tok {
            Tok::Open => {
                if let Some(top) = stack.last_mut() {
                    top.1 += 1;
                }
                stack.push((words.len(), 0));
            }
            Tok::Word(w) => {
                let top = stack.last_mut().ok_or_else(|| err("word outside brackets"))?;
                top.1 += 1;
                if syntax == TreeSyntax::Labeled && top.1 == 1 {
                    continue;
                }
                spans.insert((words.len(), words.len() + 1));
                words.push(w.to_string());
            }
            Tok::Close => {
                let (start, _) = stack.pop().ok_or_else(|| err("unbalanced ')'"))?;
                if words.len() > start {
                    spans.insert((start, words.len()));
                }
                closed_root = stack.is_empty();
            }
        }
    }
    if !stack.is_empty() {
        return Err(err("unbalanced '(': missing ')'"));
    }
    if words.is_empty() {
        return Err(err("tree has no words"));
    }
    Ok(GoldTree { words, spans })
}

/// One tree per non-blank line.
pub fn load_gold_trees(path: impl AsRef<Path>, syntax: TreeSyntax) -> Result<Vec<GoldTree>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_tree_line(l, syntax, i + 1))
        .collect()
}
