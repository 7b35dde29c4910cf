//! Objective, gradients, optimizer and the training loop.

mod adam;
mod gradcheck;
mod checkpoint;
mod loss;
mod model;
mod params;
mod trainer;

pub use adam::OptState;
pub use gradcheck::{gradient_check, TensorCheck, GRAD_CHECK_FLOOR};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedTensor};
pub use loss::{
    contrastive_loss, contrastive_loss_grad, contrastive_loss_with_temperature, reconstruction_loss,
    reconstruction_loss_grad, total_loss, total_loss_grad, total_loss_with_temperature, LossParts, ViewPair,
};
pub use model::{backward, forward, loss_and_grad, loss_at, BaseInput, Forward, ModelInputs, SecondInput};
pub use params::{derive_seed, FeatureBand, ModelParams, TrainConfig, STREAM_BATCH, STREAM_CLASSIC, STREAM_FIELDS, STREAM_INIT};
pub use trainer::{
    cross_source, prepare_inputs, propagate, train, write_loss_csv, LossRecord, TrainOutput, Trainer, APPNP_TOL,
};

