use std::path::Path;

use anyhow::{bail, Context, Result};
use dance_core::audio::FeatureStats;
use dance_core::fsutil::write_atomic;
use dance_core::model::{train, Checkpoint, EpochLog, TrainState, TrainingExample, Tsmt};
use dance_core::motion::{fit_quantization_spec, Split, POSE_DIMS};
use dance_core::{Checkpoint64, Model64, SeededRng};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::{Corpus, LoadedSegment};
use crate::Warnings;

pub const CHECKPOINT_NAME: &str = "model.ckpt";
pub const LOG_NAME: &str = "train_log.csv";
pub const SUMMARY_NAME: &str = "train_summary.json";

#[derive(Debug, Clone)]
pub struct TrainArgs<'a> {
    pub processed: &'a Path,
    pub out: &'a Path,
    pub no_audio: bool,
    pub resume: Option<&'a Path>,
}

#[derive(Debug, Serialize)]
struct Summary {
    train_segments: usize,
    validation_segments: usize,
    /// Pose values outside the quantization range, clamped to the edge bins.
    clamped_train: usize,
    clamped_validation: usize,
    epochs: usize,
    final_loss: Option<f64>,
    validation_loss: Option<f64>,
    use_audio: bool,
    parameters: usize,
}

pub fn log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,loss,lr\n");
    for e in log {
        s += &format!("{},{},{}\n", e.epoch, e.loss, e.lr);
    }
    s
}

fn mean_pose(segments: &[LoadedSegment]) -> Vec<f64> {
    let mut sum = vec![0.0; POSE_DIMS];
    let mut n = 0usize;
    for s in segments {
        for t in 0..s.pose.len() {
            for (a, v) in sum.iter_mut().zip(s.pose.frame(t)) {
                *a += v;
            }
            n += 1;
        }
    }
    sum.into_iter().map(|v| v / n as f64).collect()
}

fn examples(
    segments: &[LoadedSegment],
    ck: &Checkpoint64,
) -> Result<(Vec<TrainingExample>, usize)> {
    let mut clamped = 0;
    let mut out = Vec::with_capacity(segments.len());
    for s in segments {
        let (ex, c) = TrainingExample::from_parts(&s.pose, &s.audio, &ck.spec, &ck.stats)
            .with_context(|| format!("segment {}@{}", s.entry.source, s.entry.start))?;
        clamped += c;
        out.push(ex);
    }
    Ok((out, clamped))
}

fn fresh(cfg: &RunConfig, train_set: &[LoadedSegment], no_audio: bool) -> Result<Checkpoint64> {
    let mut model_cfg = cfg.model.clone();
    model_cfg.use_audio = !no_audio;
    let poses: Vec<_> = train_set.iter().map(|s| s.pose.clone()).collect();
    let spec = fit_quantization_spec(&poses, model_cfg.bins)?;
    let stats = if cfg.standardize_audio {
        FeatureStats::fit(train_set.iter().map(|s| &s.audio))?
    } else {
        FeatureStats::identity()
    };
    let seed = SeededRng::new(cfg.seed).split(0).seed();
    let model = Model64::new(model_cfg, seed)?;
    Ok(Checkpoint::new(model, spec, stats, mean_pose(train_set))?)
}

/// Trains a model on the training split of a preprocessed corpus.
pub fn run(cfg: &RunConfig, args: TrainArgs<'_>, warn: &mut Warnings) -> Result<()> {
    let corpus = Corpus::open(args.processed)?;
    let train_set = corpus.load(Split::Train, cfg.preprocess.fps)?;
    let val_set = corpus.load(Split::Validation, cfg.preprocess.fps)?;
    if train_set.is_empty() {
        bail!(
            "the manifest in {} has no training segments",
            args.processed.display()
        );
    }

    let (mut ck, mut state) = match args.resume {
        Some(path) => {
            let mut ck =
                Checkpoint64::load(path).with_context(|| format!("loading {}", path.display()))?;
            let Some((_, state)) = ck.train.take() else {
                bail!("{} holds no training state to resume from", path.display());
            };
            if args.no_audio == ck.model.config().use_audio {
                bail!(
                    "--no-audio does not match the checkpoint, which was trained {} audio",
                    if ck.model.config().use_audio {
                        "with"
                    } else {
                        "without"
                    }
                );
            }
            let mut expected = cfg.model.clone();
            expected.use_audio = ck.model.config().use_audio;
            if &expected != ck.model.config() {
                warn.push(
                    "model section differs from the resumed checkpoint; using the checkpoint's"
                        .to_string(),
                );
            }
            (ck, state)
        }
        None => {
            let ck = fresh(cfg, &train_set, args.no_audio)?;
            let state = TrainState::new(&ck.model, &cfg.train);
            (ck, state)
        }
    };

    let (train_ex, clamped_train) = examples(&train_set, &ck)?;
    let (val_ex, clamped_validation) = examples(&val_set, &ck)?;
    if clamped_validation > 0 {
        warn.push(format!(
            "{clamped_validation} validation pose values fell outside the quantization range and were clamped"
        ));
    }

    std::fs::create_dir_all(args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    cfg.echo(args.out)?;
    let ck_path = args.out.join(CHECKPOINT_NAME);
    let log_path = args.out.join(LOG_NAME);
    let save = |model: &Tsmt<f64>, state: &TrainState<f64>| -> dance_core::Result<()> {
        let snapshot = Checkpoint {
            model: model.clone(),
            spec: ck.spec.clone(),
            stats: ck.stats.clone(),
            mean_pose: ck.mean_pose.clone(),
            train: Some((cfg.train.clone(), state.clone())),
        };
        snapshot.save(&ck_path)?;
        write_atomic(&log_path, log_csv(&state.log).as_bytes())
    };

    let train_seed = SeededRng::new(cfg.seed).split(1).seed();
    let every = cfg.train.checkpoint_every;
    let mut model = ck.model.clone();
    train(
        &mut model,
        &mut state,
        &cfg.train,
        &train_ex,
        train_seed,
        |m, st, entry| {
            eprintln!(
                "epoch {:>4}  loss {:.6}  lr {:e}",
                entry.epoch, entry.loss, entry.lr
            );
            if every > 0 && st.epoch % every == 0 && st.epoch < cfg.train.epochs {
                save(m, st)?;
            }
            Ok(())
        },
    )?;
    save(&model, &state)?;
    ck.model = model;

    let validation_loss = if val_ex.is_empty() {
        None
    } else {
        let inputs: Vec<_> = val_ex.iter().map(|e| e.input()).collect();
        Some(ck.model.batch_loss(&inputs)?)
    };
    let summary = Summary {
        train_segments: train_ex.len(),
        validation_segments: val_ex.len(),
        clamped_train,
        clamped_validation,
        epochs: state.epoch,
        final_loss: state.log.last().map(|e| e.loss),
        validation_loss,
        use_audio: ck.model.config().use_audio,
        parameters: ck.model.parameter_count(),
    };
    write_atomic(
        &args.out.join(SUMMARY_NAME),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    match (summary.final_loss, validation_loss) {
        (Some(l), Some(v)) => println!(
            "trained {} epochs: loss {l:.6}, validation loss {v:.6}",
            state.epoch
        ),
        (Some(l), None) => println!("trained {} epochs: loss {l:.6}", state.epoch),
        _ => println!(
            "checkpoint already at epoch {}; nothing to train",
            state.epoch
        ),
    }
    println!("checkpoint written to {}", ck_path.display());
    Ok(())
}
