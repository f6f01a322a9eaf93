use std::path::Path;

use serde::{Deserialize, Serialize};

use super::skeleton::{joint_names, NUM_JOINTS, PELVIS, POSE_DIMS};
use crate::error::{Error, Result};

/// A `T × 17 × 3` joint-position sequence sampled at `fps`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    fps: f64,
    joints: Vec<String>,
    /// Row-major `T × 51`.
    frames: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseFile {
    fps: f64,
    joints: Vec<String>,
    frames: Vec<Vec<[f64; 3]>>,
}

impl PoseSequence {
    /// Builds a sequence from flat `T × 51` data with the canonical joint names.
    pub fn new(fps: f64, frames: Vec<f64>) -> Result<Self> {
        Self::with_joints(fps, joint_names(), frames)
    }

    pub fn with_joints(fps: f64, joints: Vec<String>, frames: Vec<f64>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        if joints.len() != NUM_JOINTS {
            return Err(Error::invalid(format!(
                "skeleton must have {NUM_JOINTS} joints, got {}",
                joints.len()
            )));
        }
        if frames.is_empty() || !frames.len().is_multiple_of(POSE_DIMS) {
            return Err(Error::invalid(format!(
                "pose data length {} is not a positive multiple of {POSE_DIMS}",
                frames.len()
            )));
        }
        if let Some(i) = frames.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate in frame {}",
                i / POSE_DIMS
            )));
        }
        Ok(Self {
            fps,
            joints,
            frames,
        })
    }

    pub fn from_joint_frames(fps: f64, frames: &[[[f64; 3]; NUM_JOINTS]]) -> Result<Self> {
        let flat = frames
            .iter()
            .flat_map(|f| f.iter().flatten().copied())
            .collect();
        Self::new(fps, flat)
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn joints(&self) -> &[String] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.frames.len() / POSE_DIMS
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * POSE_DIMS..(t + 1) * POSE_DIMS]
    }

    pub fn joint(&self, t: usize, j: usize) -> [f64; 3] {
        let f = self.frame(t);
        [f[3 * j], f[3 * j + 1], f[3 * j + 2]]
    }

    /// Values of coordinate `d` (0..51) over time.
    pub fn channel(&self, d: usize) -> Vec<f64> {
        (0..self.len())
            .map(|t| self.frames[t * POSE_DIMS + d])
            .collect()
    }

    /// Rebuilds a sequence from per-channel series of equal length.
    pub fn from_channels(fps: f64, joints: Vec<String>, channels: &[Vec<f64>]) -> Result<Self> {
        let t_len = channels.first().map_or(0, Vec::len);
        let mut frames = vec![0.0; t_len * POSE_DIMS];
        for (d, ch) in channels.iter().enumerate() {
            for (t, &v) in ch.iter().enumerate() {
                frames[t * POSE_DIMS + d] = v;
            }
        }
        Self::with_joints(fps, joints, frames)
    }

    /// Frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!(
                "frame range {start}..{end} outside 0..{}",
                self.len()
            )));
        }
        Self::with_joints(
            self.fps,
            self.joints.clone(),
            self.frames[start * POSE_DIMS..end * POSE_DIMS].to_vec(),
        )
    }

    /// Translates every frame so the pelvis sits at the origin.
    pub fn root_relative(&self) -> Self {
        let mut frames = self.frames.clone();
        for f in frames.chunks_mut(POSE_DIMS) {
            let root = [f[3 * PELVIS], f[3 * PELVIS + 1], f[3 * PELVIS + 2]];
            for j in 0..NUM_JOINTS {
                for k in 0..3 {
                    f[3 * j + k] -= root[k];
                }
            }
        }
        Self {
            fps: self.fps,
            joints: self.joints.clone(),
            frames,
        }
    }

    /// Applies `f` to every joint position.
    pub fn map_points(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut frames = self.frames.clone();
        for p in frames.chunks_mut(3) {
            let q = f([p[0], p[1], p[2]]);
            p.copy_from_slice(&q);
        }
        Self {
            fps: self.fps,
            joints: self.joints.clone(),
            frames,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = PoseFile {
            fps: self.fps,
            joints: self.joints.clone(),
            frames: self
                .frames
                .chunks(POSE_DIMS)
                .map(|f| f.chunks(3).map(|p| [p[0], p[1], p[2]]).collect())
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: PoseFile = serde_json::from_str(text)?;
        let mut flat = Vec::with_capacity(file.frames.len() * POSE_DIMS);
        for (t, f) in file.frames.iter().enumerate() {
            if f.len() != file.joints.len() {
                return Err(Error::invalid(format!(
                    "frame {t} has {} joints, header lists {}",
                    f.len(),
                    file.joints.len()
                )));
            }
            flat.extend(f.iter().flatten());
        }
        Self::with_joints(file.fps, file.joints, flat)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, self.to_json()?.as_bytes())
    }
}
