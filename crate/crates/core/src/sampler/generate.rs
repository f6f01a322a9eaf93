use std::time::Instant;

use super::categorical::{sample_categorical, Sampling};
use super::session::Session;
use crate::audio::AudioFeatureSequence;
use crate::error::{Error, Result};
use crate::model::{Checkpoint, SequenceInput, Tsmt};
use crate::motion::{dequantize, quantize_counted, PoseSequence, QuantizedPoseSequence};
use crate::rng::SeededRng;
use crate::Scalar;

/// Standardized audio conditioning for token generation.
#[derive(Debug, Clone, Copy)]
pub struct AudioInput<'a> {
    /// Row-major `T × audio_dims`.
    pub features: &'a [f64],
    pub beat: &'a [bool],
}

/// Tokens plus per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenGeneration {
    /// Row-major `T × pose_dims`, prefix included.
    pub tokens: Vec<usize>,
    /// Sum over coordinates of the untempered log-probability of each emitted frame.
    pub log_likelihood: Vec<f64>,
    pub step_seconds: Vec<f64>,
}

/// Autoregressive generation at the token level.
///
/// The `prefix` frames are teacher-forced; every later frame is sampled
/// coordinate by coordinate. Once the model's context is full the session is
/// rebuilt from the most recent half context, so arbitrarily long outputs stay
/// within the trained window.
pub fn generate_tokens<S: Scalar>(
    model: &Tsmt<S>,
    audio: Option<AudioInput<'_>>,
    prefix: &[usize],
    length: usize,
    sampling: Sampling,
    seed: u64,
) -> Result<TokenGeneration> {
    sampling.validate()?;
    let c = model.config();
    let dims = c.pose_dims;
    if !prefix.len().is_multiple_of(dims) {
        return Err(Error::invalid(format!(
            "prefix of {} tokens is not a whole number of {dims}-token frames",
            prefix.len()
        )));
    }
    let n_prefix = prefix.len() / dims;
    if length < n_prefix || length == 0 {
        return Err(Error::invalid(format!(
            "requested length {length} is shorter than the {n_prefix}-frame seed"
        )));
    }
    let (features, beat): (&[f64], &[bool]) = match (c.use_audio, audio) {
        (true, Some(a)) => (a.features, a.beat),
        (true, None) => return Err(Error::invalid("this model needs audio input")),
        (false, _) => (&[], &[]),
    };
    if c.use_audio {
        if features.len() != beat.len() * c.audio_dims {
            return Err(Error::shape(
                "generation audio",
                &[features.len()],
                &[beat.len(), c.audio_dims],
            ));
        }
        if beat.len() < length {
            return Err(Error::invalid(format!(
                "audio has {} frames but {length} were requested",
                beat.len()
            )));
        }
    }
    let frame_audio = |t: usize| -> (&[f64], bool) {
        if c.use_audio {
            (&features[t * c.audio_dims..(t + 1) * c.audio_dims], beat[t])
        } else {
            (&[], false)
        }
    };
    let mut rng = SeededRng::new(seed);
    let mut tokens: Vec<usize> = Vec::with_capacity(length * dims);
    let mut log_likelihood = Vec::with_capacity(length);
    let mut step_seconds = Vec::with_capacity(length);
    let mut session = Session::new(model)?;
    let keep = (c.max_context / 2).max(1);
    for t in 0..length {
        let started = Instant::now();
        if session.is_full() {
            session = Session::new(model)?;
            let from = t - keep.min(t);
            for s in from..t {
                let (f, b) = frame_audio(s);
                session.predict(f, b)?;
                session.commit(&tokens[s * dims..(s + 1) * dims])?;
            }
        }
        let (f, b) = frame_audio(t);
        let lp = session.predict(f, b)?;
        let frame: Vec<usize> = if t < n_prefix {
            prefix[t * dims..(t + 1) * dims].to_vec()
        } else {
            (0..dims)
                .map(|d| sample_categorical(lp.row(d), sampling, &mut rng))
                .collect::<Result<_>>()?
        };
        let ll: f64 = frame
            .iter()
            .enumerate()
            .map(|(d, &k)| lp.row(d)[k].as_f64())
            .sum();
        session.commit(&frame)?;
        tokens.extend_from_slice(&frame);
        log_likelihood.push(ll);
        step_seconds.push(started.elapsed().as_secs_f64());
    }
    Ok(TokenGeneration {
        tokens,
        log_likelihood,
        step_seconds,
    })
}

/// Per-frame negative log-likelihood (mean over coordinates) of a
/// teacher-forced sequence, computed step by step through a [`Session`].
pub fn incremental_nll<S: Scalar>(model: &Tsmt<S>, input: &SequenceInput<'_>) -> Result<Vec<f64>> {
    model.validate_input(input)?;
    let c = model.config();
    let mut session = Session::new(model)?;
    let mut out = Vec::with_capacity(input.len());
    for t in 0..input.len() {
        let f = if c.use_audio {
            &input.audio[t * c.audio_dims..(t + 1) * c.audio_dims]
        } else {
            &[][..]
        };
        let b = input.beat.get(t).copied().unwrap_or(false);
        let lp = session.predict(f, b)?;
        let frame = &input.tokens[t * c.pose_dims..(t + 1) * c.pose_dims];
        let mut nll = S::zero();
        for (d, &k) in frame.iter().enumerate() {
            nll += -lp.row(d)[k];
        }
        out.push((nll / S::of_usize(c.pose_dims)).as_f64());
        session.commit(frame)?;
    }
    Ok(out)
}

/// How generation is seeded.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedFrames {
    /// One frame: the checkpoint's dataset mean pose.
    MeanPose,
    Poses(PoseSequence),
}

/// A pose-level generation request.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    /// Raw (unstandardized) features; standardized with the checkpoint's statistics.
    pub audio: Option<AudioFeatureSequence>,
    pub seed_frames: SeedFrames,
    pub length: usize,
    pub sampling: Sampling,
    pub seed: u64,
}

/// Generated motion.
#[derive(Debug, Clone)]
pub struct GenerationResult {
    pub poses: PoseSequence,
    pub tokens: QuantizedPoseSequence,
    pub log_likelihood: Vec<f64>,
    /// Wall-clock seconds per step; informational only, never reproducible.
    pub step_seconds: Vec<f64>,
}

/// Generates a dequantized pose sequence from a checkpoint.
pub fn generate<S: Scalar>(
    request: &GenerationRequest,
    ck: &Checkpoint<S>,
) -> Result<GenerationResult> {
    ck.validate()?;
    let fps = request.audio.as_ref().map_or(24.0, |a| a.fps());
    let seed_pose = match &request.seed_frames {
        SeedFrames::MeanPose => PoseSequence::new(fps, ck.mean_pose.clone())?,
        SeedFrames::Poses(p) => p.clone(),
    };
    let (seed_tokens, _) = quantize_counted(&seed_pose, &ck.spec)?;
    let standardized = request.audio.as_ref().map(|a| a.standardized(&ck.stats));
    let audio = standardized.as_ref().map(|a| AudioInput {
        features: a.mfcc(),
        beat: a.beat(),
    });
    let gen = generate_tokens(
        &ck.model,
        audio,
        seed_tokens.tokens(),
        request.length,
        request.sampling,
        request.seed,
    )?;
    let tokens = QuantizedPoseSequence::new(gen.tokens, ck.spec.clone(), fps)?;
    let poses = dequantize(&tokens)?;
    Ok(GenerationResult {
        poses,
        tokens,
        log_likelihood: gen.log_likelihood,
        step_seconds: gen.step_seconds,
    })
}
