//! Greedy and beam decoding with attention tracing.

mod decode;
mod trace;

pub use decode::{beam_decode, decode_all, greedy_decode, score_tokens, DecodeOptions, Hypothesis};
pub use trace::{format_weight, AttentionTrace, TraceFile};
