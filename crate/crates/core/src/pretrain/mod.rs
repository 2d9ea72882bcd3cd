//! NT-Xent objective, AdamW, and the pretraining loop.

mod loss;
mod train;

use thiserror::Error;

pub use loss::{nt_xent_loss, LossError};
pub use crate::optim::{clip_grad_norm, AdamW};
pub use train::{
    batch_inputs, contrastive_loss_and_grad, pretrain, snapshot_steps, train_step, ContrastiveConfig, LogRow,
    PretrainOutput, Snapshot, StepOutput, TrainLog, SNAPSHOT_FRACTIONS,
};

use crate::augment::AugmentError;
use crate::encoder::{CheckpointError, EncoderError};
use crate::metrics::MetricError;

#[derive(Debug, Error)]
pub enum PretrainError {
    #[error("invalid contrastive config: {0}")]
    Config(String),
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch size {batch} exceeds corpus size {corpus}")]
    BatchTooLarge { batch: usize, corpus: usize },
    #[error("non-finite loss or gradient at step {step} (loss {loss})")]
    NonFiniteLoss { step: usize, loss: f64 },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}
