use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

/// Surface forms of the reserved ids, in id order.
pub const RESERVED: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Bidirectional token/id map. Ids are dense and ids 0..4 are reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from tokens in reserved-id-free order.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut all: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> = all.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        for tok in tokens {
            let tok = tok.into();
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Input(format!("invalid vocabulary token {tok:?}")));
            }
            if index.contains_key(&tok) {
                return Err(Error::Input(format!("duplicate vocabulary token {tok:?}")));
            }
            index.insert(tok.clone(), all.len());
            all.push(tok);
        }
        Ok(Vocabulary { tokens: all, index })
    }

    /// Keeps the `max_size - 4` most frequent whitespace tokens, breaking
    /// frequency ties lexicographically.
    pub fn build<I, S>(corpus: I, max_size: usize) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if max_size < RESERVED.len() {
            return Err(Error::Input(format!(
                "vocabulary size {max_size} cannot hold the {} reserved tokens",
                RESERVED.len()
            )));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut seen_any = false;
        for line in corpus {
            for tok in line.as_ref().split_whitespace() {
                seen_any = true;
                if !RESERVED.contains(&tok) {
                    *counts.entry(tok.to_string()).or_default() += 1;
                }
            }
        }
        if !seen_any {
            return Err(Error::Input(
                "cannot build a vocabulary from an empty corpus".into(),
            ));
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - RESERVED.len());
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t))
    }

    /// Vocabulary of `size` ids whose non-reserved tokens are spelled `w<id>`.
    pub fn synthetic(size: usize) -> Result<Self> {
        if size < RESERVED.len() {
            return Err(Error::Input(format!("vocabulary size {size} is too small")));
        }
        Self::from_tokens((RESERVED.len()..size).map(|i| format!("w{i}")))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or UNK.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(RESERVED[UNK])
    }

    pub fn encode(&self, sentence: &str) -> Vec<usize> {
        sentence.split_whitespace().map(|t| self.id(t)).collect()
    }

    /// Space-joined surface form, skipping PAD/BOS and stopping at EOS.
    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .take_while(|&&i| i != EOS)
            .filter(|&&i| i != PAD && i != BOS)
            .map(|&i| self.token(i))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Writes non-reserved tokens one per line (line number = id - 4).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for t in &self.tokens[RESERVED.len()..] {
            text.push_str(t);
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut tokens = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let tok = line.trim_end_matches('\r');
            if RESERVED.contains(&tok) {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("reserved token {tok:?} must not appear in a vocabulary file"),
                });
            }
            tokens.push(tok.to_string());
        }
        Self::from_tokens(tokens)
    }
}
