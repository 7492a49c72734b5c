//! Joint cross-entropy + center-loss training with Adam, per-batch center
//! updates and resumable checkpoints.

mod centers;
mod checkpoint;
mod loss;
mod trainer;

pub use centers::ClassCenters;
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use loss::{combined_loss, LossOutput};
pub use trainer::{
    prepare, train, EpochRecord, LossMode, TrainConfig, TrainLog, TrainState, DIVERGENCE_LIMIT, TRAIN_CHUNK,
};
