use std::fmt;

use crate::error::{Error, Result};

/// Scoring function of the self-attentive residual connections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scoring {
    /// `e_i = v·tanh(W_y y_i)`: depends on the previous word only.
    Content,
    /// `e_i = v·tanh(W_y y_i + W_s s_t)`: also conditioned on the decoder state.
    ContentScope,
}

impl Scoring {
    pub fn name(self) -> &'static str {
        match self {
            Scoring::Content => "content",
            Scoring::ContentScope => "content+scope",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "content" => Some(Scoring::Content),
            "content+scope" | "content-scope" | "content_scope" => Some(Scoring::ContentScope),
            _ => None,
        }
    }
}

/// How the decoder uses its own target-side history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderVariant {
    Baseline,
    /// Recurrence reads an attention summary of previous decoder states.
    MemoryRnn,
    /// Output layer additionally reads an attention summary of previous states.
    SelfAttentiveRnn,
    /// Output layer reads the mean of previous output embeddings.
    MeanResidual,
    /// Output layer reads an attention-weighted mean of previous embeddings.
    AttnResidual(Scoring),
}

impl DecoderVariant {
    pub const ALL: [DecoderVariant; 6] = [
        DecoderVariant::Baseline,
        DecoderVariant::MemoryRnn,
        DecoderVariant::SelfAttentiveRnn,
        DecoderVariant::MeanResidual,
        DecoderVariant::AttnResidual(Scoring::Content),
        DecoderVariant::AttnResidual(Scoring::ContentScope),
    ];

    pub fn name(self) -> &'static str {
        match self {
            DecoderVariant::Baseline => "baseline",
            DecoderVariant::MemoryRnn => "memory-rnn",
            DecoderVariant::SelfAttentiveRnn => "self-attentive-rnn",
            DecoderVariant::MeanResidual => "mean-residual",
            DecoderVariant::AttnResidual(_) => "attn-residual",
        }
    }

    pub fn scoring(self) -> Option<Scoring> {
        match self {
            DecoderVariant::AttnResidual(s) => Some(s),
            _ => None,
        }
    }

    /// Builds a variant from its name and an optional scoring function.
    /// Scoring is only accepted for `attn-residual`, where it defaults to
    /// content scoring.
    pub fn parse(name: &str, scoring: Option<&str>) -> Result<Self> {
        let base = match name.replace('_', "-").as_str() {
            "baseline" => DecoderVariant::Baseline,
            "memory-rnn" => DecoderVariant::MemoryRnn,
            "self-attentive-rnn" => DecoderVariant::SelfAttentiveRnn,
            "mean-residual" => DecoderVariant::MeanResidual,
            "attn-residual" => {
                let s = match scoring {
                    None => Scoring::Content,
                    Some(s) => Scoring::parse(s)
                        .ok_or_else(|| Error::Input(format!("unknown scoring function {s:?}")))?,
                };
                return Ok(DecoderVariant::AttnResidual(s));
            }
            other => return Err(Error::Input(format!("unknown decoder variant {other:?}"))),
        };
        if let Some(s) = scoring {
            return Err(Error::Input(format!(
                "scoring {s:?} requires the attn-residual decoder, not {}",
                base.name()
            )));
        }
        Ok(base)
    }

    /// What the target-side attention of this variant ranges over.
    pub fn target_attention(self) -> Option<TargetAttention> {
        match self {
            DecoderVariant::Baseline | DecoderVariant::MeanResidual => None,
            DecoderVariant::MemoryRnn | DecoderVariant::SelfAttentiveRnn => Some(TargetAttention::Hiddens),
            DecoderVariant::AttnResidual(_) => Some(TargetAttention::Embeddings),
        }
    }

    pub fn supports_lm(self) -> bool {
        matches!(
            self,
            DecoderVariant::Baseline | DecoderVariant::MeanResidual | DecoderVariant::AttnResidual(_)
        )
    }
}

impl fmt::Display for DecoderVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoderVariant::AttnResidual(s) => write!(f, "attn-residual({})", s.name()),
            v => f.write_str(v.name()),
        }
    }
}

/// Items a target-side attention row ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetAttention {
    /// Output embeddings `y_0..y_{t-1}` (row `t` has `t` entries).
    Embeddings,
    /// Previous decoder states `s_1..s_{t-1}` (row `t` has `t - 1` entries).
    Hiddens,
}

impl TargetAttention {
    pub fn name(self) -> &'static str {
        match self {
            TargetAttention::Embeddings => "embeddings",
            TargetAttention::Hiddens => "hiddens",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "embeddings" => Some(TargetAttention::Embeddings),
            "hiddens" => Some(TargetAttention::Hiddens),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Encoder, source attention and decoder.
    Translation,
    /// Decoder alone with the context vector fixed at zero.
    LanguageModel,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Translation => "translation",
            Mode::LanguageModel => "lm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "translation" => Some(Mode::Translation),
            "lm" => Some(Mode::LanguageModel),
            _ => None,
        }
    }
}

/// Architecture hyper-parameters; everything the parameter layout depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub variant: DecoderVariant,
    pub mode: Mode,
    /// Word embedding size `e`.
    pub embed_dim: usize,
    /// Hidden state size `d` (each encoder direction and the decoder).
    pub hidden_dim: usize,
    /// Zero in language-model mode.
    pub src_vocab: usize,
    pub tgt_vocab: usize,
}

impl ModelConfig {
    pub fn translation(
        variant: DecoderVariant,
        embed_dim: usize,
        hidden_dim: usize,
        src_vocab: usize,
        tgt_vocab: usize,
    ) -> Result<Self> {
        let cfg = ModelConfig {
            variant,
            mode: Mode::Translation,
            embed_dim,
            hidden_dim,
            src_vocab,
            tgt_vocab,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn language_model(
        variant: DecoderVariant,
        embed_dim: usize,
        hidden_dim: usize,
        vocab: usize,
    ) -> Result<Self> {
        let cfg = ModelConfig {
            variant,
            mode: Mode::LanguageModel,
            embed_dim,
            hidden_dim,
            src_vocab: 0,
            tgt_vocab: vocab,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden_dim == 0 || self.tgt_vocab == 0 {
            return Err(Error::Input(
                "dimensions and vocabulary sizes must be positive".into(),
            ));
        }
        match self.mode {
            Mode::Translation if self.src_vocab == 0 => {
                Err(Error::Input("translation model needs a source vocabulary".into()))
            }
            Mode::LanguageModel if !self.variant.supports_lm() => Err(Error::Contract(format!(
                "{} has no language-model form",
                self.variant
            ))),
            Mode::LanguageModel if self.src_vocab != 0 => {
                Err(Error::Input("language model has no source vocabulary".into()))
            }
            _ => Ok(()),
        }
    }
}
