//! The `dance` command line: preprocessing, training, generation,
//! evaluation and rendering driven by one TOML config.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod render;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use dance_core::sampler::Sampling;
use dance_core::synth::SynthOptions;

use crate::commands::evaluate::EvaluateArgs;
use crate::commands::generate::{AudioSource, GenerateArgs};
use crate::commands::render::RenderArgs;
use crate::commands::train::TrainArgs;
use crate::config::{RunConfig, CONFIG_ENV};
use crate::render::View;

/// Non-fatal problems, echoed to stderr as they happen and summarized at exit.
#[derive(Debug, Default)]
pub struct Warnings {
    items: Vec<String>,
}

impl Warnings {
    pub fn push(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.items.push(msg);
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

#[derive(Debug, Parser)]
#[command(name = "dance", version, about = "Music-conditioned dance synthesis")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, resample and segment a raw corpus into a manifest.
    Preprocess {
        /// Raw corpus directory [default: paths.dataset].
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory [default: paths.processed].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model on a preprocessed corpus.
    Train {
        /// Preprocessed corpus [default: paths.processed].
        #[arg(long)]
        processed: Option<PathBuf>,
        /// Output directory [default: paths.checkpoints].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Train the pose stream only.
        #[arg(long)]
        no_audio: bool,
        /// Continue from a checkpoint's training state.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Overrides train.epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Sample dances for a piece of music.
    Generate(GenerateCli),
    /// Score generated dances against references.
    Evaluate {
        /// Directory of generated pose files [default: paths.outputs/generated].
        #[arg(long)]
        generated: Option<PathBuf>,
        /// Directory of reference pose files [default: paths.processed/poses].
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Style classifier for FID and diversity scores.
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Output directory [default: paths.outputs/evaluation].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a pose file as numbered SVG frames.
    Render {
        /// Pose file to draw.
        #[arg(long)]
        poses: PathBuf,
        /// Output directory for the SVG files.
        #[arg(long)]
        out: PathBuf,
        /// Camera direction.
        #[arg(long, value_enum, default_value = "front")]
        view: View,
        /// Frame rate for the time stamps [default: the file's].
        #[arg(long)]
        fps: Option<f64>,
        /// Frame-index beat file; beat frames are tinted and a plot is written.
        #[arg(long)]
        beats: Option<PathBuf>,
        /// Image width and height in pixels.
        #[arg(long, default_value_t = 400.0)]
        size: f64,
    },
    /// Print a checkpoint's header.
    InspectCheckpoint {
        /// Checkpoint file.
        path: PathBuf,
        /// Print JSON instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Train the style classifier on the labelled corpus.
    TrainClassifier {
        /// Preprocessed corpus [default: paths.processed].
        #[arg(long)]
        processed: Option<PathBuf>,
        /// Output file [default: paths.checkpoints/classifier.json].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic toy corpus.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of recordings.
        #[arg(long, default_value_t = 6)]
        sources: usize,
        /// Length of each recording in seconds.
        #[arg(long, default_value_t = 30.0)]
        seconds: f64,
        /// Pose frame rate.
        #[arg(long, default_value_t = 30.0)]
        pose_fps: f64,
        /// Audio sample rate in Hz.
        #[arg(long, default_value_t = 16_000)]
        sample_rate: u32,
    },
}

#[derive(Debug, Args)]
pub struct GenerateCli {
    /// Checkpoint [default: paths.checkpoints/model.ckpt].
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// WAV file to dance to.
    #[arg(long, conflicts_with = "features")]
    audio: Option<PathBuf>,
    /// Beat annotations (seconds) for --audio.
    #[arg(long, requires = "audio")]
    beats: Option<PathBuf>,
    /// Cached feature CSV instead of a WAV file.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Frames to generate [default: the audio length].
    #[arg(long)]
    length: Option<usize>,
    /// Pose file whose frames seed generation [default: the mean pose].
    #[arg(long)]
    seed_pose: Option<PathBuf>,
    /// Softmax temperature; must be > 0 (use --top-k 1 for argmax).
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Sample only among the k most likely bins [default: all bins].
    #[arg(long)]
    top_k: Option<usize>,
    /// Number of dances to sample.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output name prefix [default: the audio file stem].
    #[arg(long)]
    name: Option<String>,
    /// Output directory [default: paths.outputs/generated].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs one parsed command line. Returns the warnings it raised.
pub fn run(cli: Cli) -> Result<Warnings> {
    if let Some(n) = cli.jobs {
        anyhow::ensure!(n > 0, "--jobs must be at least 1");
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut cfg = RunConfig::resolve(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut warn = Warnings::default();
    let paths = cfg.paths.clone();
    match cli.command {
        Command::Preprocess { input, out } => {
            let input = input.unwrap_or(paths.dataset);
            let out = out.unwrap_or(paths.processed);
            commands::preprocess::run(&cfg, &input, &out, &mut warn)?;
        }
        Command::Train {
            processed,
            out,
            no_audio,
            resume,
            epochs,
        } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let processed = processed.unwrap_or(paths.processed);
            let out = out.unwrap_or(paths.checkpoints);
            let args = TrainArgs {
                processed: &processed,
                out: &out,
                no_audio,
                resume: resume.as_deref(),
            };
            commands::train::run(&cfg, args, &mut warn)?;
        }
        Command::Generate(g) => {
            let audio = match (g.audio, g.features) {
                (Some(path), _) => Some(AudioSource::Wav {
                    path,
                    beats: g.beats,
                }),
                (None, Some(path)) => Some(AudioSource::Features(path)),
                (None, None) => None,
            };
            let args = GenerateArgs {
                checkpoint: g
                    .checkpoint
                    .unwrap_or_else(|| paths.checkpoints.join(commands::train::CHECKPOINT_NAME)),
                audio,
                length: g.length,
                seed_pose: g.seed_pose,
                sampling: Sampling {
                    temperature: g.temperature,
                    top_k: g.top_k,
                },
                count: g.count,
                name: g.name,
                out: g.out.unwrap_or_else(|| paths.outputs.join("generated")),
            };
            commands::generate::run(&cfg, &args, &mut warn)?;
        }
        Command::Evaluate {
            generated,
            reference,
            classifier,
            out,
        } => {
            let args = EvaluateArgs {
                generated: generated.unwrap_or_else(|| paths.outputs.join("generated")),
                reference: reference.unwrap_or_else(|| paths.processed.join(manifest::POSES_DIR)),
                classifier,
                out: out.unwrap_or_else(|| paths.outputs.join("evaluation")),
            };
            commands::evaluate::run(&cfg, &args, &mut warn)?;
        }
        Command::Render {
            poses,
            out,
            view,
            fps,
            beats,
            size,
        } => {
            anyhow::ensure!(size > 0.0 && size.is_finite(), "--size must be positive");
            let args = RenderArgs {
                poses: &poses,
                out: &out,
                view,
                fps,
                beats: beats.as_deref(),
                size,
            };
            commands::render::run(&args, &mut warn)?;
        }
        Command::InspectCheckpoint { path, json } => commands::inspect(&path, json)?,
        Command::TrainClassifier { processed, out } => {
            let processed = processed.unwrap_or(paths.processed);
            let out = out.unwrap_or_else(|| paths.checkpoints.join("classifier.json"));
            commands::classifier::run(&cfg, &processed, &out, &mut warn)?;
        }
        Command::Synth {
            out,
            sources,
            seconds,
            pose_fps,
            sample_rate,
        } => {
            let opts = SynthOptions {
                sources,
                seconds,
                pose_fps,
                sample_rate,
                ..SynthOptions::default()
            };
            commands::synth(&cfg, &out, &opts)?;
        }
    }
    Ok(warn)
}
