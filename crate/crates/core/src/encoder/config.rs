use serde::{Deserialize, Serialize};

use super::EncoderError;

/// Nonlinearity between the two projector layers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectorActivation {
    #[default]
    Relu,
    /// Linear test mode.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_feedforward: usize,
    pub max_len: usize,
    pub dropout_ratio: f64,
    pub projector_out: usize,
    #[serde(default)]
    pub projector_activation: ProjectorActivation,
}

impl EncoderConfig {
    /// CPU-sized default: 64-wide, two layers, four heads.
    pub fn desk(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            d_feedforward: 128,
            max_len: 128,
            dropout_ratio: 0.1,
            projector_out: 32,
            projector_activation: ProjectorActivation::Relu,
        }
    }

    /// 600-wide representation projected to 128, used for shape checks.
    pub fn paper_shape(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            d_model: 600,
            n_layers: 1,
            n_heads: 12,
            d_feedforward: 2400,
            max_len: 512,
            dropout_ratio: 0.1,
            projector_out: 128,
            projector_activation: ProjectorActivation::Relu,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |msg: String| Err(EncoderError::Config(msg));
        if self.vocab_size < 5 {
            return bad(format!("vocab_size {} leaves no room for the reserved tokens", self.vocab_size));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.n_layers == 0 {
            return bad("d_model, n_heads and n_layers must be positive".into());
        }
        if self.d_model % self.n_heads != 0 {
            return bad(format!("d_model {} is not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.d_feedforward == 0 || self.projector_out == 0 {
            return bad("d_feedforward and projector_out must be positive".into());
        }
        if self.max_len < 3 {
            return bad(format!("max_len {} cannot hold [CLS] x [SEP]", self.max_len));
        }
        if !(0.0..1.0).contains(&self.dropout_ratio) {
            return bad(format!("dropout_ratio {} is outside [0, 1)", self.dropout_ratio));
        }
        Ok(())
    }
}
