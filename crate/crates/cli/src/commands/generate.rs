use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dance_core::audio::{
    extract_features, load_beat_annotations, read_feature_csv, AudioFeatureSequence, BeatTrack,
};
use dance_core::fsutil::write_atomic;
use dance_core::metrics::BeatSequence;
use dance_core::motion::{resample_to_fps, PoseSequence};
use dance_core::sampler::{generate, GenerationRequest, GenerationResult, Sampling, SeedFrames};
use dance_core::{Checkpoint64, SeededRng};

use crate::config::RunConfig;
use crate::Warnings;

#[derive(Debug, Clone)]
pub enum AudioSource {
    Wav {
        path: PathBuf,
        beats: Option<PathBuf>,
    },
    Features(PathBuf),
}

impl AudioSource {
    fn stem(&self) -> String {
        let p = match self {
            AudioSource::Wav { path, .. } => path,
            AudioSource::Features(path) => path,
        };
        p.file_stem().map_or_else(
            || "generated".to_string(),
            |s| s.to_string_lossy().into_owned(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct GenerateArgs {
    pub checkpoint: PathBuf,
    pub audio: Option<AudioSource>,
    pub length: Option<usize>,
    pub seed_pose: Option<PathBuf>,
    pub sampling: Sampling,
    pub count: usize,
    pub name: Option<String>,
    pub out: PathBuf,
}

fn load_audio(
    src: &AudioSource,
    cfg: &RunConfig,
    warn: &mut Warnings,
) -> Result<AudioFeatureSequence> {
    Ok(match src {
        AudioSource::Wav { path, beats } => {
            let track = match beats {
                Some(b) => load_beat_annotations(b)?,
                None => {
                    warn.push(format!(
                        "no beat file for {}; the beat signal is empty",
                        path.display()
                    ));
                    BeatTrack::new(Vec::new())?
                }
            };
            extract_features(path, &track, &cfg.audio, None)
                .with_context(|| format!("reading {}", path.display()))?
        }
        AudioSource::Features(path) => read_feature_csv(path, cfg.audio.fps)?,
    })
}

fn load_seed(path: &Path, fps: f64, warn: &mut Warnings) -> Result<PoseSequence> {
    let raw = PoseSequence::load(path)?;
    let out = resample_to_fps(&raw, fps)?;
    for w in out.warnings {
        warn.push(format!("{}: {w}", path.display()));
    }
    Ok(out.value.root_relative())
}

fn tokens_csv(res: &GenerationResult) -> String {
    let mut s = String::new();
    for t in 0..res.tokens.len() {
        let row: Vec<String> = res.tokens.frame(t).iter().map(|k| k.to_string()).collect();
        s += &row.join(",");
        s.push('\n');
    }
    s
}

fn steps_csv(res: &GenerationResult) -> String {
    let mut s = String::from("step,log_likelihood\n");
    for (t, ll) in res.log_likelihood.iter().enumerate() {
        s += &format!("{t},{ll}\n");
    }
    s
}

/// Samples `count` dances for one piece of music.
pub fn run(cfg: &RunConfig, args: &GenerateArgs, warn: &mut Warnings) -> Result<()> {
    let ck = Checkpoint64::load(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    args.sampling.validate()?;
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    let use_audio = ck.model.config().use_audio;
    let audio = match (&args.audio, use_audio) {
        (Some(src), _) => Some(load_audio(src, cfg, warn)?),
        (None, true) => bail!("this checkpoint was trained with audio; pass --audio or --features"),
        (None, false) => None,
    };
    let length = match (args.length, &audio) {
        (Some(n), Some(a)) if n > a.len() => bail!(
            "requested {n} frames but the audio only provides {} frames",
            a.len()
        ),
        (Some(n), _) => n,
        (None, Some(a)) => a.len(),
        (None, None) => bail!("--length is required without audio"),
    };
    let fps = audio.as_ref().map_or(cfg.preprocess.fps, |a| a.fps());
    let seed_frames = match &args.seed_pose {
        Some(p) => SeedFrames::Poses(load_seed(p, fps, warn)?),
        None => SeedFrames::MeanPose,
    };
    let conditioning = if use_audio { audio.clone() } else { None };
    let base = args.name.clone().unwrap_or_else(|| {
        args.audio
            .as_ref()
            .map_or_else(|| "silence".to_string(), AudioSource::stem)
    });
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    cfg.echo(&args.out)?;
    let rng = SeededRng::new(cfg.seed);
    for i in 0..args.count {
        let name = format!("{base}__{i}");
        let request = GenerationRequest {
            audio: conditioning.clone(),
            seed_frames: seed_frames.clone(),
            length,
            sampling: args.sampling,
            seed: rng.split(i as u64).seed(),
        };
        let res = generate(&request, &ck).with_context(|| format!("generating {name}"))?;
        res.poses.save(&args.out.join(format!("{name}.json")))?;
        write_atomic(
            &args.out.join(format!("{name}.tokens.csv")),
            tokens_csv(&res).as_bytes(),
        )?;
        write_atomic(
            &args.out.join(format!("{name}.steps.csv")),
            steps_csv(&res).as_bytes(),
        )?;
        if let Some(a) = &audio {
            let beats = BeatSequence::new(
                a.beat_frames()
                    .into_iter()
                    .filter(|&f| f < length)
                    .collect(),
            )?;
            write_atomic(
                &args.out.join(format!("{name}.music_beats.txt")),
                beats.to_text().as_bytes(),
            )?;
        }
        let secs = &res.step_seconds;
        let total: f64 = secs.iter().sum();
        let max = secs.iter().copied().fold(0.0, f64::max);
        println!(
            "{name}: {} frames, {:.3} ms/step mean, {:.3} ms/step max",
            res.poses.len(),
            1e3 * total / secs.len().max(1) as f64,
            1e3 * max
        );
    }
    Ok(())
}
