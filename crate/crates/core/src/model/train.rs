use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::tsmt::{SequenceInput, Tsmt};
use crate::audio::{AudioFeatureSequence, FeatureStats};
use crate::error::{Error, Result};
use crate::motion::{quantize_counted, PoseSequence, QuantizationSpec, Segment};
use crate::numerics::{AdamConfig, AdamState};
use crate::rng::SeededRng;
use crate::Scalar;

/// A tokenized, standardized training sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub tokens: Vec<usize>,
    pub audio: Vec<f64>,
    pub beat: Vec<bool>,
}

impl TrainingExample {
    pub fn input(&self) -> SequenceInput<'_> {
        SequenceInput {
            tokens: &self.tokens,
            audio: &self.audio,
            beat: &self.beat,
        }
    }

    /// Quantizes the pose and standardizes the audio of one segment.
    pub fn from_segment(
        seg: &Segment,
        spec: &QuantizationSpec,
        stats: &FeatureStats,
    ) -> Result<(Self, usize)> {
        Self::from_parts(&seg.pose, &seg.audio, spec, stats)
    }

    /// Returns the example and the number of clamped coordinates.
    pub fn from_parts(
        pose: &PoseSequence,
        audio: &AudioFeatureSequence,
        spec: &QuantizationSpec,
        stats: &FeatureStats,
    ) -> Result<(Self, usize)> {
        if pose.len() != audio.len() {
            return Err(Error::invalid(format!(
                "pose has {} frames but audio has {}",
                pose.len(),
                audio.len()
            )));
        }
        let (q, clamped) = quantize_counted(pose, spec)?;
        let audio = audio.standardized(stats);
        Ok((
            Self {
                tokens: q.tokens().to_vec(),
                audio: audio.mfcc().to_vec(),
                beat: audio.beat().to_vec(),
            },
            clamped,
        ))
    }
}

/// Mean training loss and learning rate of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

/// Optimizer state carried across epochs and checkpoints.
#[derive(Debug, Clone)]
pub struct TrainState<S> {
    pub adam: AdamState<S>,
    /// Next epoch to run (0-based).
    pub epoch: usize,
    pub log: Vec<EpochLog>,
}

impl<S: Scalar> TrainState<S> {
    pub fn new(model: &Tsmt<S>, cfg: &TrainConfig) -> Self {
        let adam = AdamState::new(
            model.params(),
            AdamConfig {
                lr: cfg.lr,
                beta1: cfg.beta1,
                beta2: cfg.beta2,
                eps: cfg.adam_eps,
            },
        );
        Self {
            adam,
            epoch: 0,
            log: Vec::new(),
        }
    }
}

/// Runs one epoch of shuffled mini-batch Adam over `examples`.
///
/// Batch order comes from the generator split off `seed` for this epoch and
/// each sequence draws its dropout masks from its own split, so the result is
/// independent of thread scheduling and of whether training was resumed.
pub fn train_epoch<S: Scalar>(
    model: &mut Tsmt<S>,
    state: &mut TrainState<S>,
    cfg: &TrainConfig,
    examples: &[TrainingExample],
    seed: u64,
) -> Result<EpochLog> {
    if examples.is_empty() {
        return Err(Error::invalid("no training examples"));
    }
    cfg.validate()?;
    let epoch = state.epoch;
    let lr = cfg.lr_at(epoch);
    state.adam.set_lr(lr);
    let base = SeededRng::new(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    base.split(epoch as u64).shuffle(&mut order);
    let dropout_base = base.split(u64::MAX - epoch as u64);
    let mut weighted = 0.0;
    for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
        let batch: Vec<SequenceInput<'_>> = chunk.iter().map(|&i| examples[i].input()).collect();
        let rngs = (model.config().dropout > 0.0).then(|| {
            chunk
                .iter()
                .enumerate()
                .map(|(k, _)| dropout_base.split(((b as u64) << 24) | k as u64))
                .collect()
        });
        let (loss, grads) = model.loss_and_grads(&batch, rngs)?;
        let loss = loss.as_f64();
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        state.adam.step(model.params_mut(), &grads)?;
        if !model.params().all_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: f64::NAN,
            });
        }
        weighted += loss * chunk.len() as f64;
    }
    let entry = EpochLog {
        epoch,
        loss: weighted / examples.len() as f64,
        lr,
    };
    state.log.push(entry.clone());
    state.epoch += 1;
    Ok(entry)
}

/// Trains until `state.epoch` reaches `cfg.epochs`, calling `on_epoch` after
/// every epoch (for logging and periodic checkpoints). Divergence stops
/// training with an error; checkpoints already written by `on_epoch` remain
/// the last good state.
pub fn train<S: Scalar>(
    model: &mut Tsmt<S>,
    state: &mut TrainState<S>,
    cfg: &TrainConfig,
    examples: &[TrainingExample],
    seed: u64,
    mut on_epoch: impl FnMut(&Tsmt<S>, &TrainState<S>, &EpochLog) -> Result<()>,
) -> Result<()> {
    while state.epoch < cfg.epochs {
        let entry = train_epoch(model, state, cfg, examples, seed)?;
        on_epoch(model, state, &entry)?;
    }
    Ok(())
}
