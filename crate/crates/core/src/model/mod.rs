//! The error-detection scorer: trainable node embeddings, two separate
//! 3-layer graph-attention encoders, average pooling, a 2-layer feed-forward
//! head with sigmoid output, and binary cross-entropy training over
//! beam-structured batches. Forward and backward passes are written out by
//! hand and checked against central finite differences.

mod checkpoint;
mod embeddings;
mod forward;
mod gradcheck;
mod params;
mod prep;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use embeddings::{
    read_embedding_file, write_embedding_file, EmbeddingRecord, EmbeddingStore,
};
pub use forward::{
    embed_nodes, encode_pair, gat_layer, loss, predict, score, score_pair, EncoderSide,
    ForwardTrace,
};
pub use gradcheck::{grad_check, GradCheckReport};
pub use params::{LayerSlots, Parameters, Slot, SlotId};
pub use prep::{build_pair, LabelVocab, PairExample, PreppedGraph, TokenVocab};
pub use train::{train, AdamW, LogRow, TrainBeam, TrainOutcome};

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::graph::EdgeType;

fn default_gat_layers() -> usize {
    3
}
fn default_heads() -> usize {
    4
}
fn default_hidden() -> usize {
    64
}
fn default_slope() -> f64 {
    0.2
}
fn default_dropout() -> f64 {
    0.1
}
fn default_embed_std() -> f64 {
    0.1
}
fn default_weight_std() -> f64 {
    0.05
}
fn default_w1_std() -> f64 {
    1.0
}
fn default_output_std() -> f64 {
    0.003
}
fn default_ffn_bias_std() -> f64 {
    0.7
}
fn default_tie() -> bool {
    true
}

/// Scorer hyperparameters and vocabulary sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "default_heads")]
    pub attention_heads: usize,
    #[serde(default = "default_gat_layers")]
    pub gat_layers: usize,
    #[serde(default = "default_slope")]
    pub leaky_relu_slope: f64,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    pub token_vocab: usize,
    pub label_vocab: usize,
    #[serde(default)]
    pub external_dim: Option<usize>,
    #[serde(default = "default_embed_std")]
    pub embed_init_std: f64,
    #[serde(default = "default_weight_std")]
    pub weight_init_std: f64,
    /// Width of the FFN hidden layer; defaults to 4x hidden_dim.
    #[serde(default)]
    pub ffn_hidden_dim: Option<usize>,
    /// Init scale of the FFN hidden weights. Large values give the head
    /// strong random nonlinear features of the pooled pair representation.
    #[serde(default = "default_w1_std")]
    pub ffn_w1_init_std: f64,
    /// Init scale of the readout weights; kept small so early training is
    /// dominated by learned rather than random evidence.
    #[serde(default = "default_output_std")]
    pub output_init_std: f64,
    /// Init scale of the FFN hidden biases. Nonzero offsets give the tanh
    /// units curvature, which the tied initialization below relies on.
    #[serde(default = "default_ffn_bias_std")]
    pub ffn_bias_init_std: f64,
    /// Initialize each FFN hidden row with identical question-half and
    /// SQL-half weights. Such units respond to agreement between the two
    /// pooled representations from the very first step, which is what makes
    /// the scorer trainable at fine-tuning-scale learning rates.
    #[serde(default = "default_tie")]
    pub tie_ffn_halves: bool,
    #[serde(default)]
    pub seed: u64,
    /// Ablation escape hatch for encoder depths other than 3.
    #[serde(default)]
    pub allow_custom_layers: bool,
}

impl ModelConfig {
    pub fn new(token_vocab: usize, label_vocab: usize) -> Self {
        ModelConfig {
            hidden_dim: default_hidden(),
            attention_heads: default_heads(),
            gat_layers: default_gat_layers(),
            leaky_relu_slope: default_slope(),
            dropout_rate: default_dropout(),
            token_vocab,
            label_vocab,
            external_dim: None,
            embed_init_std: default_embed_std(),
            weight_init_std: default_weight_std(),
            ffn_hidden_dim: None,
            ffn_w1_init_std: default_w1_std(),
            output_init_std: default_output_std(),
            ffn_bias_init_std: default_ffn_bias_std(),
            tie_ffn_halves: default_tie(),
            seed: 0,
            allow_custom_layers: false,
        }
    }

    pub fn edge_types(&self) -> usize {
        EdgeType::COUNT
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.attention_heads
    }

    /// FFN hidden width (input is 2 * hidden_dim).
    pub fn ffn_hidden(&self) -> usize {
        self.ffn_hidden_dim.unwrap_or(4 * self.hidden_dim)
    }

    /// True when external embeddings need a learned projection.
    pub fn needs_projection(&self) -> bool {
        self.external_dim.is_some_and(|e| e != self.hidden_dim)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_dim == 0 || self.attention_heads == 0 {
            return Err(ModelError::Config("hidden_dim and attention_heads must be > 0".into()));
        }
        if self.hidden_dim % self.attention_heads != 0 {
            return Err(ModelError::Config(format!(
                "hidden_dim {} not divisible by attention_heads {}",
                self.hidden_dim, self.attention_heads
            )));
        }
        if self.gat_layers != 3 && !self.allow_custom_layers {
            return Err(ModelError::Config(format!(
                "gat_layers must be 3 (got {}); set allow_custom_layers for ablations",
                self.gat_layers
            )));
        }
        if self.token_vocab == 0 || self.label_vocab == 0 {
            return Err(ModelError::Config("vocabulary sizes must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::Config("dropout_rate must be in [0, 1)".into()));
        }
        Ok(())
    }
}

fn default_batch() -> usize {
    16
}
fn default_epochs() -> usize {
    20
}
fn default_lr() -> f64 {
    3e-5
}
fn default_warmup() -> f64 {
    0.1
}
fn default_wd() -> f64 {
    0.01
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

/// Optimization recipe: K-beam batches, decoupled-weight-decay adaptive
/// moments, and a linear decay schedule with warmup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Beams consumed per optimization step.
    #[serde(default = "default_batch")]
    pub batch_beams: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_beams: default_batch(),
            epochs: default_epochs(),
            learning_rate: default_lr(),
            warmup_fraction: default_warmup(),
            weight_decay: default_wd(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(ModelError::Config("warmup_fraction must be in (0, 1)".into()));
        }
        if self.batch_beams == 0 || self.epochs == 0 {
            return Err(ModelError::Config("batch_beams and epochs must be > 0".into()));
        }
        Ok(())
    }
}
