use crate::error::{Error, Result};
use crate::model::{DecoderVariant, Mode, ModelConfig};
use crate::scalar::Precision;

/// Optimisation and model hyper-parameters for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub rho: f64,
    pub epsilon: f64,
    pub dropout_p: f64,
    pub init_scale: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub precision: Precision,
    pub variant: DecoderVariant,
    pub mode: Mode,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_len: usize,
    /// Global L2 norm the gradient is clipped to; `0` disables clipping.
    pub clip_norm: f64,
    /// Stop as soon as dev token accuracy reaches this value.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rho: 0.95,
            epsilon: 1e-6,
            dropout_p: 0.5,
            init_scale: 0.01,
            batch_size: 32,
            max_epochs: 10,
            seed: 1,
            precision: Precision::Single,
            variant: DecoderVariant::Baseline,
            mode: Mode::Translation,
            embed_dim: 32,
            hidden_dim: 64,
            max_len: 50,
            clip_norm: 1.0,
            target_accuracy: None,
        }
    }
}

impl TrainConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Input(msg));
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout_p));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho {} outside (0, 1)", self.rho));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad(format!(
                "init scale {} must be finite and nonnegative",
                self.init_scale
            ));
        }
        if !(self.clip_norm >= 0.0) {
            return bad(format!("clip norm {} must be nonnegative", self.clip_norm));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.max_len == 0 {
            return bad("batch size, epoch count and maximum length must be positive".into());
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return bad("model dimensions must be positive".into());
        }
        if self.mode == Mode::LanguageModel && !self.variant.supports_lm() {
            return bad(format!("{} has no language-model form", self.variant));
        }
        Ok(())
    }

    /// Model shape for the given vocabulary sizes (`src_vocab` is ignored in
    /// language-model mode).
    pub fn model_config(&self, src_vocab: usize, tgt_vocab: usize) -> Result<ModelConfig> {
        match self.mode {
            Mode::Translation => ModelConfig::translation(
                self.variant,
                self.embed_dim,
                self.hidden_dim,
                src_vocab,
                tgt_vocab,
            ),
            Mode::LanguageModel => {
                ModelConfig::language_model(self.variant, self.embed_dim, self.hidden_dim, tgt_vocab)
            }
        }
    }
}
