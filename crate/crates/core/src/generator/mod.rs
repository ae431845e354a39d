//! Trainable text-to-token sequence models: a pre-norm transformer
//! encoder–decoder conditioned on phonemes, and its decoder-only
//! (unconditional) variant. Both are trained with teacher forcing and expose
//! per-token log-probabilities.

mod checkpoint;
mod model;
mod tape;
mod train;

use serde::{Deserialize, Serialize};

use crate::corpus::special::NUM_SPECIAL;
use crate::error::{Error, Result};

pub use model::GeneratorModel;
pub use train::{evaluate_loss, loss_gradients, train, TrainReport, TrainingPair};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// Parameters are kept representable as `f32` and checkpointed as such.
    Single,
    #[default]
    Double,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Precision::Single),
            "double" => Ok(Precision::Double),
            other => Err(Error::Config(format!("unknown precision {other:?} (single|double)"))),
        }
    }
}

/// Architecture hyperparameters. Vocabulary sizes include the reserved
/// special ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub model_dim: usize,
    /// Token embedding width; projected to `model_dim` when they differ.
    pub embed_dim: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    /// `false` for the decoder-only language model.
    pub conditional: bool,
}

impl GeneratorConfig {
    /// Desk-scale default: 2+2 layers, width 64, 4 heads.
    pub fn toy(src_vocab: usize, tgt_vocab: usize) -> Self {
        Self {
            enc_layers: 2,
            dec_layers: 2,
            model_dim: 64,
            embed_dim: 64,
            heads: 4,
            ffn_dim: 256,
            dropout: 0.1,
            max_len: 256,
            src_vocab,
            tgt_vocab,
            conditional: true,
        }
    }

    /// The full-size setting: 6+6 layers of width 512 with 256-wide
    /// embeddings and 8 heads.
    pub fn full(src_vocab: usize, tgt_vocab: usize) -> Self {
        Self {
            enc_layers: 6,
            dec_layers: 6,
            model_dim: 512,
            embed_dim: 256,
            heads: 8,
            ffn_dim: 2048,
            dropout: 0.1,
            max_len: 1024,
            src_vocab,
            tgt_vocab,
            conditional: true,
        }
    }

    /// Turns this into the decoder-only variant.
    pub fn unconditional(mut self) -> Self {
        self.conditional = false;
        self.enc_layers = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.model_dim == 0 || self.embed_dim == 0 || self.ffn_dim == 0 || self.heads == 0 {
            return fail("dimensions and head count must be positive".into());
        }
        if self.model_dim % self.heads != 0 {
            return fail(format!(
                "model_dim {} is not divisible by {} heads",
                self.model_dim, self.heads
            ));
        }
        if self.max_len < 2 {
            return fail(format!("max_len {} must be at least 2", self.max_len));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        let min_vocab = NUM_SPECIAL as usize + 1;
        if self.tgt_vocab < min_vocab {
            return fail(format!(
                "tgt_vocab {} must exceed the {NUM_SPECIAL} reserved ids",
                self.tgt_vocab
            ));
        }
        if self.conditional && self.src_vocab < min_vocab {
            return fail(format!(
                "src_vocab {} must exceed the {NUM_SPECIAL} reserved ids",
                self.src_vocab
            ));
        }
        if !self.conditional && self.enc_layers != 0 {
            return fail("a decoder-only model has no encoder layers".into());
        }
        Ok(())
    }
}

/// Optimization settings for [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Fraction of all steps spent in linear learning-rate warmup.
    pub warmup_fraction: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            learning_rate: 3e-4,
            weight_decay: 0.01,
            epochs: 10,
            seed: 0,
            precision: Precision::Single,
            warmup_fraction: 0.01,
            grad_clip: Some(1.0),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!(
                "warmup fraction {} outside [0, 1]",
                self.warmup_fraction
            )));
        }
        Ok(())
    }
}
