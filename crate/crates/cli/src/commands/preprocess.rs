use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dance_core::audio::{
    append_deltas, compute_mfcc, load_beat_annotations, rasterize_beats, read_wav,
    write_feature_csv, AudioFeatureSequence,
};
use dance_core::fsutil::write_atomic;
use dance_core::motion::{
    hp_filter_sequence, resample_to_fps, segment_dataset, PoseSequence, SkippedSource, Split,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::{self, ManifestEntry};
use crate::Warnings;

#[derive(Debug, Clone, Serialize)]
struct Mismatch {
    source: String,
    pose_seconds: f64,
    audio_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SplitCounts {
    train: usize,
    validation: usize,
}

#[derive(Debug, Clone, Serialize)]
struct Summary {
    sources_found: usize,
    sources_used: usize,
    segments: SplitCounts,
    /// Sources whose pose and audio durations differ by more than a frame.
    mismatched: Vec<Mismatch>,
    /// Sources lacking an audio or beat file.
    incomplete: Vec<String>,
    /// Sources shorter than one segment.
    too_short: Vec<SkippedSource>,
    warnings: Vec<String>,
}

enum Prepared {
    Ready(String, PoseSequence, AudioFeatureSequence, Vec<String>),
    Mismatched(Mismatch),
}

fn stems(dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            if let Some(stem) = path.file_stem() {
                out.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    out.sort();
    Ok(out)
}

fn prepare(id: &str, input: &Path, cfg: &RunConfig) -> Result<Prepared> {
    let raw = PoseSequence::load(&input.join("poses").join(format!("{id}.json")))?;
    let wav = input.join("audio").join(format!("{id}.wav"));
    let (samples, sample_rate) = read_wav(&wav)?;
    let pose_seconds = raw.len() as f64 / raw.fps();
    let audio_seconds = samples.len() as f64 / sample_rate as f64;
    if (pose_seconds - audio_seconds).abs() > 1.0 / raw.fps() {
        return Ok(Prepared::Mismatched(Mismatch {
            source: id.to_string(),
            pose_seconds,
            audio_seconds,
        }));
    }
    let mut warnings = Vec::new();
    let filtered = hp_filter_sequence(&raw, cfg.preprocess.hp_lambda)?;
    warnings.extend(filtered.warnings);
    let resampled = resample_to_fps(&filtered.value, cfg.preprocess.fps)?;
    warnings.extend(resampled.warnings);
    let pose = resampled.value.root_relative();

    let beats = load_beat_annotations(&input.join("beats").join(format!("{id}.txt")))?;
    let statics = compute_mfcc(&samples, sample_rate, &cfg.audio, Some(pose.len()))?;
    let rows = append_deltas(&statics);
    let beat = rasterize_beats(&beats, cfg.audio.fps, rows.len());
    let audio = AudioFeatureSequence::from_rows(cfg.audio.fps, &rows, beat)?;
    let warnings = warnings.into_iter().map(|w| format!("{id}: {w}")).collect();
    Ok(Prepared::Ready(id.to_string(), pose, audio, warnings))
}

/// Conditions a raw corpus and cuts it into training segments.
pub fn run(cfg: &RunConfig, input: &Path, out: &Path, warn: &mut Warnings) -> Result<()> {
    let pose_dir = input.join("poses");
    if !pose_dir.is_dir() {
        bail!("{} is not a directory of pose files", pose_dir.display());
    }
    let found = stems(&pose_dir)?;
    if found.is_empty() {
        bail!("no pose files found in {}", pose_dir.display());
    }
    let (complete, incomplete): (Vec<String>, Vec<String>) =
        found.iter().cloned().partition(|id| {
            input.join("audio").join(format!("{id}.wav")).is_file()
                && input.join("beats").join(format!("{id}.txt")).is_file()
        });
    for id in &incomplete {
        warn.push(format!("{id}: missing audio or beat file, skipped"));
    }

    let prepared = complete
        .par_iter()
        .map(|id| prepare(id, input, cfg).with_context(|| format!("preprocessing {id}")))
        .collect::<Result<Vec<_>>>()?;
    let mut sources = Vec::new();
    let mut mismatched = Vec::new();
    let mut file_warnings = Vec::new();
    for p in prepared {
        match p {
            Prepared::Ready(id, pose, audio, w) => {
                file_warnings.extend(w);
                sources.push((id, pose, audio));
            }
            Prepared::Mismatched(m) => {
                warn.push(format!(
                    "{}: pose lasts {:.3} s but audio lasts {:.3} s, skipped",
                    m.source, m.pose_seconds, m.audio_seconds
                ));
                mismatched.push(m);
            }
        }
    }
    for w in &file_warnings {
        warn.push(w.clone());
    }
    if sources.is_empty() {
        bail!("no usable sources in {}", input.display());
    }

    let set = segment_dataset(&sources, &cfg.preprocess.segment, cfg.seed)?;
    for s in &set.skipped {
        warn.push(format!(
            "{}: {} frames is shorter than one {}-frame segment, skipped",
            s.source_id, s.frames, cfg.preprocess.segment.length
        ));
    }
    if set.segments.is_empty() {
        warn.push("no segments were produced".to_string());
    }

    for sub in [manifest::POSES_DIR, manifest::FEATURES_DIR] {
        std::fs::create_dir_all(out.join(sub))
            .with_context(|| format!("creating {}", out.join(sub).display()))?;
    }
    sources
        .par_iter()
        .try_for_each(|(id, pose, audio)| -> Result<()> {
            pose.save(&out.join(manifest::pose_rel(id)))?;
            write_feature_csv(&out.join(manifest::features_rel(id)), audio)?;
            Ok(())
        })?;
    let labels_src = input.join(manifest::LABELS_NAME);
    if labels_src.is_file() {
        let labels: BTreeMap<String, String> = serde_json::from_str(
            &std::fs::read_to_string(&labels_src)
                .with_context(|| format!("reading {}", labels_src.display()))?,
        )
        .with_context(|| format!("parsing {}", labels_src.display()))?;
        write_atomic(
            &out.join(manifest::LABELS_NAME),
            serde_json::to_string_pretty(&labels)?.as_bytes(),
        )?;
    }

    let entries: Vec<ManifestEntry> = set
        .segments
        .iter()
        .map(|s| ManifestEntry {
            source: s.source_id.clone(),
            start: s.start,
            frames: s.pose.len(),
            split: s.split,
            poses: manifest::pose_rel(&s.source_id),
            features: manifest::features_rel(&s.source_id),
        })
        .collect();
    let summary = Summary {
        sources_found: found.len(),
        sources_used: sources.len(),
        segments: SplitCounts {
            train: set.count(Split::Train),
            validation: set.count(Split::Validation),
        },
        mismatched,
        incomplete,
        too_short: set.skipped.clone(),
        warnings: warn.items().to_vec(),
    };
    write_atomic(
        &out.join(manifest::SUMMARY_NAME),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    cfg.echo(out)?;
    write_atomic(
        &out.join(manifest::MANIFEST_NAME),
        manifest::to_jsonl(&entries)?.as_bytes(),
    )?;
    println!(
        "{} sources -> {} train / {} validation segments in {}",
        sources.len(),
        summary.segments.train,
        summary.segments.validation,
        out.display()
    );
    Ok(())
}
