use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MFCC statics plus deltas.
pub const FEATURE_DIMS: usize = 26;

/// Per-frame audio features: `T × 26` MFCC+delta rows and a beat flag.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioFeatureSequence {
    fps: f64,
    mfcc: Vec<f64>,
    beat: Vec<bool>,
}

impl AudioFeatureSequence {
    /// `mfcc` is row-major `T × 26`.
    pub fn new(fps: f64, mfcc: Vec<f64>, beat: Vec<bool>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        if mfcc.len() != beat.len() * FEATURE_DIMS {
            return Err(Error::invalid(format!(
                "{} feature values do not match {} beat flags of {FEATURE_DIMS} dims",
                mfcc.len(),
                beat.len()
            )));
        }
        if let Some(i) = mfcc.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite audio feature in frame {}",
                i / FEATURE_DIMS
            )));
        }
        Ok(Self { fps, mfcc, beat })
    }

    pub fn from_rows(fps: f64, rows: &[Vec<f64>], beat: Vec<bool>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != FEATURE_DIMS) {
            return Err(Error::invalid(format!(
                "feature row has {} values, expected {FEATURE_DIMS}",
                r.len()
            )));
        }
        Self::new(fps, rows.concat(), beat)
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.beat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beat.is_empty()
    }

    pub fn mfcc(&self) -> &[f64] {
        &self.mfcc
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.mfcc[t * FEATURE_DIMS..(t + 1) * FEATURE_DIMS]
    }

    pub fn beat(&self) -> &[bool] {
        &self.beat
    }

    pub fn beat_frames(&self) -> Vec<usize> {
        self.beat
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Frames `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() || len == 0 {
            return Err(Error::invalid(format!(
                "slice {start}..{} out of range for {} frames",
                start + len,
                self.len()
            )));
        }
        Ok(Self {
            fps: self.fps,
            mfcc: self.mfcc[start * FEATURE_DIMS..(start + len) * FEATURE_DIMS].to_vec(),
            beat: self.beat[start..start + len].to_vec(),
        })
    }

    /// Copy with the features standardized by `stats`.
    pub fn standardized(&self, stats: &FeatureStats) -> Self {
        let mut out = self.clone();
        for row in out.mfcc.chunks_mut(FEATURE_DIMS) {
            stats.apply(row);
        }
        out
    }
}

/// Per-channel mean and standard deviation of the feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Mean 0, std 1: leaves features unchanged.
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; FEATURE_DIMS],
            std: vec![1.0; FEATURE_DIMS],
        }
    }

    /// Population statistics over every frame of every sequence. Channels with
    /// (near) zero spread get std 1 so they pass through centred.
    pub fn fit<'a>(seqs: impl IntoIterator<Item = &'a AudioFeatureSequence>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = vec![0.0; FEATURE_DIMS];
        let mut sq = vec![0.0; FEATURE_DIMS];
        let seqs: Vec<_> = seqs.into_iter().collect();
        for s in &seqs {
            for row in s.mfcc.chunks(FEATURE_DIMS) {
                n += 1;
                for (a, v) in sum.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
        if n == 0 {
            return Err(Error::invalid("cannot fit feature statistics on no frames"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        for s in &seqs {
            for row in s.mfcc.chunks(FEATURE_DIMS) {
                for ((a, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *a += (v - m) * (v - m);
                }
            }
        }
        let std = sq
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s > 1e-8 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }
}
