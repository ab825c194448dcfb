//! Event-centric knowledge-infusion classifier at desk scale.
//!
//! A single trainable encoder block stands in for the pre-trained model:
//! it encodes the sentence pair and every retrieved knowledge string with
//! shared weights. Retrieved knowledge is fused per event (pool the event
//! span, concatenate its knowledge encoding, reason jointly with
//! multi-head attention) before the final classifier; ablation modes
//! replace that path with CLS-concatenation, sentence-concatenation, or
//! nothing at all.

pub mod config;
pub mod data;
pub mod gradcheck;
pub mod net;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use config::{FusionMode, ModelConfig, PrecisionMode};
pub use data::{prepare_all, prepare_example, PreparedEvent, PreparedExample};
pub use gradcheck::grad_check;
pub use net::{
    argmax, batch_loss, compute_loss, forward, loss_and_gradients, loss_only, predict,
    ForwardOutput, ForwardTrace,
};
pub use optim::{AdamW, WarmupSchedule};
pub use params::{load_model, save_model, Parameters};
pub use tensor::Matrix;
pub use train::{train, EpochRecord, TrainReport};
pub use vocab::Vocabulary;

/// Errors raised by the classifier component.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("model file error: {0}")]
    Model(String),

    #[error("training aborted: {0}")]
    Train(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] skg_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
