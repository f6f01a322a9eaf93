use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::PoseSequence;
use crate::audio::AudioFeatureSequence;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentOptions {
    /// Window length in frames.
    pub length: usize,
    pub stride: usize,
    /// Fraction of source videos assigned to the training split.
    pub split_ratio: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            length: 480,
            stride: 240,
            split_ratio: 0.8,
        }
    }
}

/// An aligned pose/audio window cut from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub source_id: String,
    pub start: usize,
    pub split: Split,
    pub pose: PoseSequence,
    pub audio: AudioFeatureSequence,
}

/// A source that produced no segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSource {
    pub source_id: String,
    pub frames: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentSet {
    pub segments: Vec<Segment>,
    pub skipped: Vec<SkippedSource>,
}

impl SegmentSet {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(move |s| s.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }
}

/// Start frames of every full window in a source of `len` frames.
pub fn window_starts(len: usize, length: usize, stride: usize) -> Vec<usize> {
    if len < length || length == 0 || stride == 0 {
        return Vec::new();
    }
    (0..=(len - length) / stride).map(|i| i * stride).collect()
}

/// Assigns whole sources to splits: a seeded shuffle of the distinct source
/// ids, with the first `round(n * ratio)` (at least one) going to training.
pub fn assign_splits(source_ids: &[String], ratio: f64, seed: u64) -> Vec<(String, Split)> {
    let mut ids: Vec<String> = source_ids
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = ids.len();
    let n_train = ((n as f64 * ratio).round() as usize).clamp(1.min(n), n);
    ids.shuffle(&mut SeededRng::new(seed));
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| {
            (
                id,
                if i < n_train {
                    Split::Train
                } else {
                    Split::Validation
                },
            )
        })
        .collect()
}

/// Cuts `(source id, pose, audio)` triples into overlapping fixed-length
/// windows. Sources shorter than one window are skipped and reported.
pub fn segment_dataset(
    sources: &[(String, PoseSequence, AudioFeatureSequence)],
    opts: &SegmentOptions,
    seed: u64,
) -> Result<SegmentSet> {
    if opts.length == 0 || opts.stride == 0 {
        return Err(Error::invalid("segment length and stride must be positive"));
    }
    if !(0.0..=1.0).contains(&opts.split_ratio) {
        return Err(Error::invalid(format!(
            "split ratio {} outside [0, 1]",
            opts.split_ratio
        )));
    }
    for (id, pose, audio) in sources {
        if pose.len() != audio.len() {
            return Err(Error::invalid(format!(
                "{id}: pose has {} frames but audio has {}",
                pose.len(),
                audio.len()
            )));
        }
        if pose.fps() != audio.fps() {
            return Err(Error::invalid(format!(
                "{id}: pose fps {} differs from audio fps {}",
                pose.fps(),
                audio.fps()
            )));
        }
    }
    let ids: Vec<String> = sources.iter().map(|(id, _, _)| id.clone()).collect();
    let splits: std::collections::BTreeMap<String, Split> =
        assign_splits(&ids, opts.split_ratio, seed)
            .into_iter()
            .collect();
    let mut set = SegmentSet::default();
    for (id, pose, audio) in sources {
        let starts = window_starts(pose.len(), opts.length, opts.stride);
        if starts.is_empty() {
            set.skipped.push(SkippedSource {
                source_id: id.clone(),
                frames: pose.len(),
            });
            continue;
        }
        for start in starts {
            set.segments.push(Segment {
                source_id: id.clone(),
                start,
                split: splits[id],
                pose: pose.slice(start, start + opts.length)?,
                audio: audio.slice(start, opts.length)?,
            });
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::FEATURE_DIMS;
    use crate::motion::POSE_DIMS;

    fn source(id: &str, t: usize) -> (String, PoseSequence, AudioFeatureSequence) {
        let pose = PoseSequence::new(24.0, (0..t * POSE_DIMS).map(|i| i as f64).collect()).unwrap();
        let audio =
            AudioFeatureSequence::new(24.0, vec![0.0; t * FEATURE_DIMS], vec![false; t]).unwrap();
        (id.to_string(), pose, audio)
    }

    #[test]
    fn stride_arithmetic() {
        let opts = SegmentOptions::default();
        let set = segment_dataset(&[source("a", 960)], &opts, 1).unwrap();
        let starts: Vec<usize> = set.segments.iter().map(|s| s.start).collect();
        assert_eq!(starts, vec![0, 240, 480]);
        assert_eq!(
            segment_dataset(&[source("a", 480)], &opts, 1)
                .unwrap()
                .segments
                .len(),
            1
        );
        let short = segment_dataset(&[source("a", 479)], &opts, 1).unwrap();
        assert!(short.segments.is_empty());
        assert_eq!(short.skipped.len(), 1);
    }

    #[test]
    fn segments_are_contiguous_slices() {
        let set = segment_dataset(&[source("a", 1000)], &SegmentOptions::default(), 3).unwrap();
        let (_, full, _) = source("a", 1000);
        for s in &set.segments {
            assert_eq!(s.pose.len(), 480);
            assert_eq!(
                s.pose.data(),
                &full.data()[s.start * POSE_DIMS..(s.start + 480) * POSE_DIMS]
            );
        }
    }

    #[test]
    fn split_is_per_source() {
        let sources: Vec<_> = (0..10).map(|i| source(&format!("v{i}"), 960)).collect();
        let set = segment_dataset(&sources, &SegmentOptions::default(), 7).unwrap();
        assert_eq!(set.count(Split::Train), 8 * 3);
        assert_eq!(set.count(Split::Validation), 2 * 3);
        for id in sources.iter().map(|s| &s.0) {
            let tags: BTreeSet<Split> = set
                .segments
                .iter()
                .filter(|s| &s.source_id == id)
                .map(|s| s.split)
                .collect();
            assert_eq!(tags.len(), 1);
        }
    }

    #[test]
    fn single_source_goes_to_train() {
        let a = assign_splits(&["x".to_string()], 0.0, 0);
        assert_eq!(a, vec![("x".to_string(), Split::Train)]);
    }
}
