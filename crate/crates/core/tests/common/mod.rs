#![allow(dead_code)]

pub mod oracles;

use dance_core::model::{SequenceInput, Tsmt, TsmtConfig};
use dance_core::SeededRng;

/// Owned random teacher-forcing input.
pub struct Owned {
    pub tokens: Vec<usize>,
    pub audio: Vec<f64>,
    pub beat: Vec<bool>,
}

impl Owned {
    pub fn random(cfg: &TsmtConfig, t: usize, rng: &mut SeededRng) -> Self {
        Self {
            tokens: (0..t * cfg.pose_dims)
                .map(|_| rng.below(cfg.bins))
                .collect(),
            audio: (0..t * cfg.audio_dims).map(|_| rng.normal()).collect(),
            beat: (0..t).map(|_| rng.uniform() < 0.3).collect(),
        }
    }

    pub fn input(&self) -> SequenceInput<'_> {
        SequenceInput {
            tokens: &self.tokens,
            audio: &self.audio,
            beat: &self.beat,
        }
    }
}

pub fn random_model(cfg: TsmtConfig, seed: u64) -> Tsmt<f64> {
    let mut m = Tsmt::new(cfg, seed).unwrap();
    m.randomize(&mut SeededRng::new(seed ^ 0x5eed), 0.5);
    m
}

#[allow(unused_imports)]
pub use oracles::rel_err;
