//! Classifier configuration and defaults.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How retrieved knowledge enters the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FusionMode {
    /// Full event-centric path: knowledge encoding, event pooling,
    /// augmentation and joint self-attention.
    #[default]
    Eki,
    /// Concatenate the pair representation with the mean knowledge
    /// encoding, skipping event pooling and attention.
    ClsConcat,
    /// Append retrieved triplet text to the input sequence and run the
    /// base path.
    SentConcat,
    /// Base classifier only; no knowledge enters the model.
    None,
}

/// Numerical execution mode. Both modes compute in f64; high-precision
/// additionally forbids parallel batch evaluation so every reduction is
/// strictly sequential, the setting gradient checks and oracle comparisons
/// run under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionMode {
    #[default]
    Standard,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Set when the vocabulary is built; 0 means "not yet known".
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub heads: usize,
    pub dropout: f64,
    /// Maximum pooled events per pair.
    pub max_events: usize,
    /// Retrieved triplets per event.
    pub retrieval_k: usize,
    /// Token budget for the concatenated triplets of one event.
    pub knowledge_max_len: usize,
    /// Token budget for the sentence pair.
    pub max_seq_len: usize,
    pub num_classes: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Consecutive non-improving dev evaluations tolerated before stopping.
    pub patience: usize,
    pub fusion_mode: FusionMode,
    pub precision: PrecisionMode,
    /// Dropout sites; the rate above applies wherever enabled.
    pub dropout_encoder: bool,
    pub dropout_event_attention: bool,
    /// Pool event spans from their two endpoints instead of all members.
    pub pool_endpoints_only: bool,
    /// Tail fraction held out as the dev split when no explicit dev set is
    /// given to the trainer CLI.
    pub dev_fraction: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 0,
            embed_dim: 768,
            heads: 2,
            dropout: 0.3,
            max_events: 10,
            retrieval_k: 10,
            knowledge_max_len: 50,
            max_seq_len: 196,
            num_classes: 4,
            learning_rate: 5e-5,
            weight_decay: 1.0,
            warmup_steps: 1000,
            epochs: 5,
            batch_size: 64,
            patience: 2,
            fusion_mode: FusionMode::Eki,
            precision: PrecisionMode::Standard,
            dropout_encoder: true,
            dropout_event_attention: true,
            pool_endpoints_only: false,
            dev_fraction: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.embed_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} must be a positive multiple of heads {}",
                self.embed_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.num_classes != 4 {
            return Err(Error::Config("num_classes must be 4".to_string()));
        }
        for (name, value) in [
            ("heads", self.heads),
            ("max_events", self.max_events),
            ("retrieval_k", self.retrieval_k),
            ("knowledge_max_len", self.knowledge_max_len),
            ("max_seq_len", self.max_seq_len),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ] {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Rows of the position table: long enough for both sequence kinds.
    pub fn max_positions(&self) -> usize {
        self.max_seq_len.max(self.knowledge_max_len)
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }
}
