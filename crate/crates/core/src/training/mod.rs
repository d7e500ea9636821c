//! Likelihood training: loss, Adadelta, dropout, initialisation,
//! checkpoints and the epoch loop.

mod adadelta;
mod checkpoint;
mod config;
mod dropout;
mod init;
mod loss;
mod trainer;

pub use adadelta::{adadelta_step, clip_grad_norm, grad_norm, OptimizerState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, read_checkpoint_header, save_checkpoint,
    CheckpointHeader, MAGIC,
};
pub use config::TrainConfig;
pub use dropout::{dropout_apply, Dropout};
pub use init::init_params;
pub use loss::nll_loss;
pub use trainer::{train, train_from, train_step, EpochMetrics, TrainOutputs, TrainResult};
