//! Attention traces and their text file format.
//!
//! ```text
//! #ARSQ-TRACE v1 variant=attn-residual target_attention=embeddings
//! SENT 0 3 4
//! w5 w7 </s>
//! <3 lines of 4 source weights>
//! <3 target rows>
//!
//! ```
//! Target rows hold one weight per previous item; an empty row is written
//! as `-`. Files for variants without target attention omit that block.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::RESERVED;
use crate::error::{Error, Result};
use crate::model::TargetAttention;

const HEADER: &str = "#ARSQ-TRACE v1";

/// Attention recorded while decoding one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    /// Emitted tokens, including a final `</s>` when one was produced.
    pub tokens: Vec<String>,
    /// One row per emitted token over source positions.
    pub source_attention: Vec<Vec<f64>>,
    /// One row per emitted token; empty when `target_kind` is `None`.
    ///
    /// Over embeddings, row `t` (0-based) covers `y_0..y_t` (BOS first).
    /// Over decoder states, it covers `s_1..s_t`, so the first row is empty.
    pub target_attention: Vec<Vec<f64>>,
    pub target_kind: Option<TargetAttention>,
}

impl AttentionTrace {
    /// Emitted words without the end-of-sentence marker.
    pub fn words(&self) -> &[String] {
        match self.tokens.last() {
            Some(t) if t == RESERVED[2] => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }

    pub fn has_target_attention(&self) -> bool {
        self.target_kind.is_some()
    }
}

/// Traces of one decoding run plus the variant they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub variant: String,
    pub target_kind: Option<TargetAttention>,
    pub traces: Vec<AttentionTrace>,
}

/// Six significant digits in positional notation.
pub fn format_weight(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || x.abs() < 1e-15 {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 20) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write_row(out: &mut String, row: &[f64]) {
    if row.is_empty() {
        out.push('-');
    } else {
        let cells: Vec<String> = row.iter().map(|&x| format_weight(x)).collect();
        out.push_str(&cells.join(" "));
    }
    out.push('\n');
}

impl TraceFile {
    pub fn to_text(&self) -> String {
        let kind = self.target_kind.map_or("none", |k| k.name());
        let mut out = format!("{HEADER} variant={} target_attention={kind}\n", self.variant);
        for (id, t) in self.traces.iter().enumerate() {
            let m = t.source_attention.first().map_or(0, |r| r.len());
            let _ = writeln!(out, "SENT {id} {} {m}", t.tokens.len());
            out.push_str(&t.tokens.join(" "));
            out.push('\n');
            for row in &t.source_attention {
                write_row(&mut out, row);
            }
            if self.target_kind.is_some() {
                for row in &t.target_attention {
                    write_row(&mut out, row);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let (_, first) = lines.next().ok_or_else(|| err(1, "empty trace file"))?;
        let rest = first
            .strip_prefix(HEADER)
            .ok_or_else(|| err(1, "missing trace header"))?;
        let mut variant = None;
        let mut kind_name = None;
        for field in rest.split_whitespace() {
            match field.split_once('=') {
                Some(("variant", v)) => variant = Some(v.to_string()),
                Some(("target_attention", v)) => kind_name = Some(v.to_string()),
                _ => return Err(err(1, &format!("unknown header field {field:?}"))),
            }
        }
        let variant = variant.ok_or_else(|| err(1, "header lacks variant"))?;
        let target_kind = match kind_name.as_deref() {
            Some("none") => None,
            Some(k) => {
                Some(TargetAttention::parse(k).ok_or_else(|| err(1, "unknown target attention kind"))?)
            }
            None => return Err(err(1, "header lacks target_attention")),
        };

        let parse_row = |line: usize, s: &str| -> Result<Vec<f64>> {
            if s.trim() == "-" {
                return Ok(Vec::new());
            }
            s.split_whitespace()
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|_| err(line, &format!("bad weight {x:?}")))
                })
                .collect()
        };

        let mut traces = Vec::new();
        while let Some((no, line)) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 || f[0] != "SENT" {
                return Err(err(no, "expected SENT <id> <n> <m>"));
            }
            let nums = f[1..]
                .iter()
                .map(|x| {
                    x.parse::<usize>()
                        .map_err(|_| err(no, "SENT fields must be counts"))
                })
                .collect::<Result<Vec<_>>>()?;
            let (id, n, m) = (nums[0], nums[1], nums[2]);
            if id != traces.len() {
                return Err(err(
                    no,
                    &format!("expected sentence {}, found {id}", traces.len()),
                ));
            }
            let mut next = |what: &str| {
                lines
                    .next()
                    .ok_or_else(|| err(no, &format!("sentence {id} ends before its {what}")))
            };
            let (tok_no, tok_line) = next("tokens")?;
            let tokens: Vec<String> = tok_line.split_whitespace().map(String::from).collect();
            if tokens.len() != n {
                return Err(err(
                    tok_no,
                    &format!("expected {n} tokens, found {}", tokens.len()),
                ));
            }
            let mut source_attention = Vec::with_capacity(n);
            for _ in 0..n {
                let (ln, l) = next("source attention")?;
                let row = parse_row(ln, l)?;
                if row.len() != m {
                    return Err(err(
                        ln,
                        &format!("expected {m} source weights, found {}", row.len()),
                    ));
                }
                source_attention.push(row);
            }
            let mut target_attention = Vec::new();
            if let Some(kind) = target_kind {
                for t in 0..n {
                    let (ln, l) = next("target attention")?;
                    let row = parse_row(ln, l)?;
                    let want = match kind {
                        TargetAttention::Embeddings => t + 1,
                        TargetAttention::Hiddens => t,
                    };
                    if row.len() != want {
                        return Err(err(
                            ln,
                            &format!("target row {t} should have {want} weights, found {}", row.len()),
                        ));
                    }
                    target_attention.push(row);
                }
            }
            traces.push(AttentionTrace {
                tokens,
                source_attention,
                target_attention,
                target_kind,
            });
        }
        Ok(TraceFile {
            variant,
            target_kind,
            traces,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
