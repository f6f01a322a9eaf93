use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dance_core::fsutil::write_atomic;
use dance_core::metrics::{
    evaluate, extract_motion_beats, BeatSequence, NamedSequence, StyleClassifier,
};
use dance_core::motion::PoseSequence;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::Warnings;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TABLE: &str = "report.txt";
pub const MOTION_BEATS_DIR: &str = "motion_beats";

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub generated: PathBuf,
    pub reference: PathBuf,
    pub classifier: Option<PathBuf>,
    pub out: PathBuf,
}

/// Pose files directly inside `dir`, sorted by name.
fn pose_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
        .collect();
    out.sort();
    Ok(out)
}

fn load_named(path: &Path) -> Result<NamedSequence> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let poses = PoseSequence::load(path)?;
    let beats_path = path.with_file_name(format!("{name}.music_beats.txt"));
    let music_beats = if beats_path.is_file() {
        Some(BeatSequence::load(&beats_path)?)
    } else {
        None
    };
    Ok(NamedSequence {
        name,
        poses,
        music_beats,
    })
}

fn load_dir(dir: &Path) -> Result<Vec<NamedSequence>> {
    pose_files(dir)?.par_iter().map(|p| load_named(p)).collect()
}

/// Scores generated dances against references.
pub fn run(cfg: &RunConfig, args: &EvaluateArgs, warn: &mut Warnings) -> Result<()> {
    let classifier = match &args.classifier {
        Some(p) => Some(
            StyleClassifier::load(p)
                .with_context(|| format!("loading classifier {}", p.display()))?,
        ),
        None => None,
    };
    let generated = load_dir(&args.generated)?;
    if generated.is_empty() {
        bail!("no generated pose files in {}", args.generated.display());
    }
    let reference = load_dir(&args.reference)?;
    if reference.is_empty() {
        warn.push(format!(
            "no reference pose files in {}",
            args.reference.display()
        ));
    }
    let report = evaluate(
        &generated,
        &reference,
        &cfg.metrics.limits,
        classifier.as_ref(),
        &cfg.evaluation_options(),
    )?;
    report.check_ranges()?;
    for w in &report.warnings {
        warn.push(w.clone());
    }

    let beats_dir = args.out.join(MOTION_BEATS_DIR);
    std::fs::create_dir_all(&beats_dir)
        .with_context(|| format!("creating {}", beats_dir.display()))?;
    generated.par_iter().try_for_each(|s| {
        let beats = extract_motion_beats(&s.poses);
        write_atomic(
            &beats_dir.join(format!("{}.txt", s.name)),
            beats.to_text().as_bytes(),
        )
    })?;
    let table = report.to_table();
    write_atomic(&args.out.join(REPORT_JSON), report.to_json()?.as_bytes())?;
    write_atomic(&args.out.join(REPORT_TABLE), table.as_bytes())?;
    cfg.echo(&args.out)?;
    print!("{table}");
    Ok(())
}
