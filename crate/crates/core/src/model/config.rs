use serde::{Deserialize, Serialize};

use crate::audio::FEATURE_DIMS;
use crate::error::{Error, Result};
use crate::motion::{DEFAULT_BINS, POSE_DIMS};

/// Shape of one transformer stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub model_dim: usize,
    pub head_dim: usize,
    pub heads: usize,
    /// Total number of stacked attention + feed-forward blocks.
    pub blocks: usize,
}

impl StreamConfig {
    pub fn attn_dim(&self) -> usize {
        self.head_dim * self.heads
    }

    pub fn ff_dim(&self, mult: usize) -> usize {
        self.model_dim * mult
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.model_dim == 0 || self.head_dim == 0 || self.heads == 0 {
            return Err(Error::invalid(format!(
                "{name} stream dimensions must be positive"
            )));
        }
        if !self.model_dim.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "{name} stream model_dim {} must be even for the positional encoding",
                self.model_dim
            )));
        }
        Ok(())
    }
}

/// Hyperparameters of the two-stream motion transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsmtConfig {
    pub pose: StreamConfig,
    pub audio: StreamConfig,
    /// Per-coordinate token embedding width.
    pub embed_dim: usize,
    pub bins: usize,
    /// Number of pose coordinates per frame.
    pub pose_dims: usize,
    pub audio_dims: usize,
    pub beat_embed_dim: usize,
    pub audio_kernel: usize,
    pub ff_mult: usize,
    pub dropout: f64,
    pub ln_eps: f64,
    /// When false the audio stream and the audio fusion term are dropped.
    pub use_audio: bool,
    /// Causal masking in the audio stream.
    pub audio_causal: bool,
    /// Longest sequence a single forward pass may see.
    pub max_context: usize,
}

impl Default for TsmtConfig {
    fn default() -> Self {
        Self {
            pose: StreamConfig {
                model_dim: 256,
                head_dim: 128,
                heads: 4,
                blocks: 4,
            },
            audio: StreamConfig {
                model_dim: 64,
                head_dim: 32,
                heads: 2,
                blocks: 2,
            },
            embed_dim: 5,
            bins: DEFAULT_BINS,
            pose_dims: POSE_DIMS,
            audio_dims: FEATURE_DIMS,
            beat_embed_dim: 30,
            audio_kernel: 3,
            ff_mult: 4,
            dropout: 0.1,
            ln_eps: 1e-5,
            use_audio: true,
            audio_causal: true,
            max_context: 480,
        }
    }
}

impl TsmtConfig {
    /// A tiny configuration for gradient checks: two joints, five bins.
    pub fn micro() -> Self {
        Self {
            pose: StreamConfig {
                model_dim: 8,
                head_dim: 4,
                heads: 2,
                blocks: 1,
            },
            audio: StreamConfig {
                model_dim: 4,
                head_dim: 2,
                heads: 2,
                blocks: 1,
            },
            embed_dim: 2,
            bins: 5,
            pose_dims: 6,
            audio_dims: 3,
            beat_embed_dim: 2,
            dropout: 0.0,
            max_context: 16,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pose.validate("pose")?;
        if self.use_audio {
            self.audio.validate("audio")?;
        }
        let checks = [
            (self.embed_dim, "embed_dim"),
            (self.pose_dims, "pose_dims"),
            (self.audio_dims, "audio_dims"),
            (self.beat_embed_dim, "beat_embed_dim"),
            (self.audio_kernel, "audio_kernel"),
            (self.ff_mult, "ff_mult"),
            (self.max_context, "max_context"),
        ];
        for (v, name) in checks {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.bins < 2 {
            return Err(Error::invalid(format!(
                "bins must be at least 2, got {}",
                self.bins
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.ln_eps > 0.0) {
            return Err(Error::invalid("ln_eps must be positive"));
        }
        Ok(())
    }
}

/// Optimization schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// First (0-based) epoch trained at the decayed rate.
    pub lr_decay_epoch: usize,
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Write a checkpoint every this many epochs; 0 writes only at the end.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 32,
            lr: 1e-4,
            lr_decay_epoch: 200,
            lr_decay: 0.3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            checkpoint_every: 10,
        }
    }
}

impl TrainConfig {
    /// Learning rate in effect during `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch >= self.lr_decay_epoch {
            self.lr * self.lr_decay
        } else {
            self.lr
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults() {
        let c = TsmtConfig::default();
        c.validate().unwrap();
        assert_eq!(
            (c.pose.model_dim, c.pose.head_dim, c.pose.heads),
            (256, 128, 4)
        );
        assert_eq!(
            (c.audio.model_dim, c.audio.head_dim, c.audio.heads),
            (64, 32, 2)
        );
        assert_eq!(c.embed_dim * c.bins, 1500);
        TsmtConfig::micro().validate().unwrap();
    }

    #[test]
    fn lr_schedule() {
        let t = TrainConfig::default();
        assert_eq!(t.lr_at(0), 1e-4);
        assert_eq!(t.lr_at(199), 1e-4);
        assert!((t.lr_at(200) - 3e-5).abs() < 1e-15);
        assert!((t.lr_at(250) - 3e-5).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = serde_json::from_str::<TsmtConfig>(r#"{"embed_dimm": 3}"#).unwrap_err();
        assert!(e.to_string().contains("embed_dimm"));
    }
}
