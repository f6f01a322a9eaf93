//! The preprocessed corpus on disk: `manifest.jsonl` with one segment per
//! line, plus per-source pose and feature caches.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dance_core::audio::{read_feature_csv, AudioFeatureSequence};
use dance_core::motion::{PoseSequence, Split};
use serde::{Deserialize, Serialize};

pub const MANIFEST_NAME: &str = "manifest.jsonl";
pub const SUMMARY_NAME: &str = "summary.json";
pub const LABELS_NAME: &str = "labels.json";
pub const POSES_DIR: &str = "poses";
pub const FEATURES_DIR: &str = "features";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub source: String,
    pub start: usize,
    pub frames: usize,
    pub split: Split,
    /// Paths relative to the manifest's directory.
    pub poses: String,
    pub features: String,
}

pub fn pose_rel(id: &str) -> String {
    format!("{POSES_DIR}/{id}.json")
}

pub fn features_rel(id: &str) -> String {
    format!("{FEATURES_DIR}/{id}.csv")
}

pub fn to_jsonl(entries: &[ManifestEntry]) -> Result<String> {
    let mut out = String::new();
    for e in entries {
        out += &serde_json::to_string(e)?;
        out.push('\n');
    }
    Ok(out)
}

/// A segment with its data loaded.
#[derive(Debug, Clone)]
pub struct LoadedSegment {
    pub entry: ManifestEntry,
    pub pose: PoseSequence,
    pub audio: AudioFeatureSequence,
}

/// A preprocessed corpus directory.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        if !path.is_file() {
            bail!(
                "no segment manifest at {} (run `dance preprocess` first)",
                path.display()
            );
        }
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .with_context(|| format!("{} line {}", path.display(), i + 1))
            })
            .collect::<Result<Vec<ManifestEntry>>>()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries,
        })
    }

    /// Loads every segment of `split`, reading each source file once.
    pub fn load(&self, split: Split, fps: f64) -> Result<Vec<LoadedSegment>> {
        let mut sources: BTreeMap<&str, (PoseSequence, AudioFeatureSequence)> = BTreeMap::new();
        let mut out = Vec::new();
        for e in self.entries.iter().filter(|e| e.split == split) {
            if !sources.contains_key(e.source.as_str()) {
                let pose = PoseSequence::load(&self.dir.join(&e.poses))?;
                let audio = read_feature_csv(&self.dir.join(&e.features), fps)?;
                sources.insert(&e.source, (pose, audio));
            }
            let (pose, audio) = &sources[e.source.as_str()];
            let end = e.start + e.frames;
            if end > pose.len() || end > audio.len() {
                bail!(
                    "segment {}@{} runs past the end of its source ({} pose, {} audio frames)",
                    e.source,
                    e.start,
                    pose.len(),
                    audio.len()
                );
            }
            out.push(LoadedSegment {
                entry: e.clone(),
                pose: pose.slice(e.start, end)?,
                audio: audio.slice(e.start, e.frames)?,
            });
        }
        Ok(out)
    }

    /// Source id → style label, from `labels.json` when present.
    pub fn labels(&self) -> Result<Option<BTreeMap<String, String>>> {
        let path = self.dir.join(LABELS_NAME);
        if !path.is_file() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        Ok(Some(
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        ))
    }
}
