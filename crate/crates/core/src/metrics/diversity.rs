use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;

/// Settings of the diversity scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiversityConfig {
    /// Random sequence pairs drawn for A-seq-D.
    pub pairs: usize,
    /// Chunk length in frames for I-seq-D.
    pub chunk_frames: usize,
    /// Generations per music track requested by the CLI for S-music-D.
    pub generations_per_music: usize,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        Self {
            pairs: 1000,
            chunk_frames: 120,
            generations_per_music: 5,
        }
    }
}

/// A diversity score; `defined` is false when there was nothing to compare
/// and the value was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub value: f64,
    pub defined: bool,
}

impl Aggregate {
    fn undefined() -> Self {
        Self {
            value: 0.0,
            defined: false,
        }
    }

    fn mean(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::undefined();
        }
        Self {
            value: values.iter().sum::<f64>() / values.len() as f64,
            defined: true,
        }
    }
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn mean_pairwise(items: &[Vec<f64>]) -> Option<f64> {
    if items.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            sum += l2(&items[i], &items[j]);
            n += 1;
        }
    }
    Some(sum / n as f64)
}

/// A-seq-D: mean feature distance over `pairs` seeded random pairs of
/// distinct sequences.
pub fn a_seq_d(features: &[Vec<f64>], pairs: usize, seed: u64) -> Aggregate {
    let n = features.len();
    if n < 2 || pairs == 0 {
        return Aggregate::undefined();
    }
    let mut rng = SeededRng::new(seed);
    let dists: Vec<f64> = (0..pairs)
        .map(|_| {
            let i = rng.below(n);
            let j = (i + 1 + rng.below(n - 1)) % n;
            l2(&features[i], &features[j])
        })
        .collect();
    Aggregate::mean(&dists)
}

/// I-seq-D: per sequence, mean pairwise distance between its chunk features;
/// averaged over sequences with at least two chunks.
pub fn i_seq_d(chunk_features: &[Vec<Vec<f64>>]) -> Aggregate {
    let per_seq: Vec<f64> = chunk_features
        .iter()
        .filter_map(|c| mean_pairwise(c))
        .collect();
    Aggregate::mean(&per_seq)
}

/// S-music-D: mean pairwise distance within groups of generations sharing
/// the same music, averaged over groups with at least two members.
pub fn s_music_d(groups: &[Vec<Vec<f64>>]) -> Aggregate {
    let per_group: Vec<f64> = groups.iter().filter_map(|g| mean_pairwise(g)).collect();
    Aggregate::mean(&per_group)
}

/// Music key of a generation file stem: the part before `__`, or the whole
/// stem when there is none.
pub fn music_key(stem: &str) -> &str {
    stem.split_once("__").map_or(stem, |(k, _)| k)
}

/// Groups indices by [`music_key`] of their names, in key order.
pub fn group_by_music<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, name) in names.into_iter().enumerate() {
        groups.entry(music_key(name)).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Start frames of the non-overlapping full chunks of a sequence.
pub fn chunk_starts(len: usize, chunk: usize) -> Vec<usize> {
    if chunk == 0 {
        return Vec::new();
    }
    (0..len / chunk).map(|i| i * chunk).collect()
}
