//! Encoder, source attention, decoder variants and language-model mode.

mod attention;
mod decoder;
mod encoder;
mod gru;
mod params;
mod variant;

pub use attention::{
    attend_embeddings, embedding_key, hidden_summary, memory_state, source_attention,
    target_summary_attentive, target_summary_mean, Attended,
};
pub use decoder::{
    argmax_rows, decoder_step, forward_batch, initial_state, lm_step, BatchForward, DecoderState, StepOutput,
};
pub use encoder::{encode, encode_batch, EncoderStates};
pub use gru::Gru;
pub use params::{layout, param_count, BoundParams, ModelParams, ParamKind, ParamSpec};
pub use variant::{DecoderVariant, Mode, ModelConfig, Scoring, TargetAttention};
