//! Corpus metrics and target-side attention statistics.

mod accuracy;
mod bleu;
mod histogram;
mod teacher;

pub use accuracy::token_accuracy;
pub use bleu::{bleu, BleuReport};
pub use histogram::{argmax_recent, max_attention_histogram, PositionHistogram};
pub use teacher::{perplexity, teacher_forced, TeacherForced};
