//! The two-stream motion transformer: configuration, layers, teacher-forced
//! training and checkpoints.

mod checkpoint;
mod config;
pub mod layers;
mod pe;
mod train;
mod tsmt;

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{StreamConfig, TrainConfig, TsmtConfig};
pub use pe::{positional_encoding, positional_row};
pub use train::{train, train_epoch, EpochLog, TrainState, TrainingExample};
pub use tsmt::{argmax, AudioParams, ModelParams, SequenceInput, Tsmt};
