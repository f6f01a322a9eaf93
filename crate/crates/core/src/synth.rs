//! Synthetic toy corpus: beat-locked stick-figure dances with matching
//! click-track audio and beat annotations, for tests and demos.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::audio::write_wav;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::motion::skeleton::neutral_pose;
use crate::motion::{PoseSequence, NUM_JOINTS};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub sources: usize,
    pub seconds: f64,
    /// Frame rate of the raw pose files; preprocessing resamples to 24.
    pub pose_fps: f64,
    pub sample_rate: u32,
    pub styles: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            sources: 6,
            seconds: 12.0,
            pose_fps: 30.0,
            sample_rate: 16_000,
            styles: 5,
        }
    }
}

/// One synthetic recording.
#[derive(Debug, Clone)]
pub struct SynthSource {
    pub id: String,
    pub style: usize,
    pub bpm: f64,
    pub poses: PoseSequence,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// Beat times in seconds.
    pub beats: Vec<f64>,
}

type Frame = [[f64; 3]; NUM_JOINTS];

/// Rotates `joints` of `frame` about the axis through `pivot` by `angle`
/// (Rodrigues' formula).
fn rotate(frame: &mut Frame, joints: &[usize], pivot: usize, axis: [f64; 3], angle: f64) {
    let p = frame[pivot];
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let k = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    for &j in joints {
        let v = [frame[j][0] - p[0], frame[j][1] - p[1], frame[j][2] - p[2]];
        let kxv = [
            k[1] * v[2] - k[2] * v[1],
            k[2] * v[0] - k[0] * v[2],
            k[0] * v[1] - k[1] * v[0],
        ];
        let kdv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
        for i in 0..3 {
            frame[j][i] = p[i] + v[i] * c + kxv[i] * s + k[i] * kdv * (1.0 - c);
        }
    }
}

const X: [f64; 3] = [1.0, 0.0, 0.0];
const Z: [f64; 3] = [0.0, 0.0, 1.0];

/// Pose at time `t` seconds for a dance of the given style and tempo. Limb
/// swings follow `cos(π · beat_phase)`, so joint speeds vanish on every beat.
pub fn dance_frame(style: usize, bpm: f64, t: f64) -> Frame {
    let beat = t * bpm / 60.0;
    let swing = (PI * beat).cos();
    let half = (PI * beat / 2.0).cos();
    let mut f = neutral_pose();
    let (arm, fore, knee, lean) = match style % 5 {
        0 => (0.5 * swing, 0.6 + 0.4 * swing, 0.0, 0.0),
        1 => (0.3 * half, 0.8, 0.35 * (1.0 + swing), 0.0),
        2 => (0.6 * swing, 0.3, 0.15 * (1.0 - swing), 0.15 * half),
        3 => (0.2, 1.0 + 0.5 * swing, 0.2 * (1.0 + half), 0.1 * swing),
        _ => (
            0.45 * half,
            0.5 + 0.3 * half,
            0.25 * (1.0 + swing),
            -0.1 * half,
        ),
    };
    // Knees bend by lifting the lower legs backwards.
    rotate(&mut f, &[3], 2, X, knee);
    rotate(&mut f, &[6], 5, X, knee * 0.8);
    // Arms swing forward/back in opposition, forearms flex.
    rotate(&mut f, &[13], 12, X, -fore);
    rotate(&mut f, &[16], 15, X, -fore * 0.9);
    rotate(&mut f, &[12, 13], 11, X, -arm);
    rotate(&mut f, &[15, 16], 14, X, arm);
    // Torso sway.
    rotate(&mut f, &[8, 9, 10, 11, 12, 13, 14, 15, 16], 7, Z, lean);
    // Vertical bounce of the whole body.
    let bounce = 0.03 * swing.abs();
    for j in f.iter_mut() {
        j[1] -= bounce;
    }
    f
}

/// A dance of `frames` frames at `fps`.
pub fn dance_sequence(
    style: usize,
    bpm: f64,
    frames: usize,
    fps: f64,
    phase: f64,
) -> Result<PoseSequence> {
    let data: Vec<Frame> = (0..frames)
        .map(|i| dance_frame(style, bpm, phase + i as f64 / fps))
        .collect();
    PoseSequence::from_joint_frames(fps, &data)
}

/// Click track with a style-dependent drone.
fn music(
    style: usize,
    beats: &[f64],
    seconds: f64,
    sample_rate: u32,
    rng: &mut SeededRng,
) -> Vec<f64> {
    let n = (seconds * sample_rate as f64).round() as usize;
    let sr = sample_rate as f64;
    let tone = 110.0 * (1.0 + style as f64 * 0.5);
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            0.15 * (2.0 * PI * tone * t).sin() + 0.01 * (rng.uniform() - 0.5)
        })
        .collect();
    let click_len = (0.05 * sr) as usize;
    for &b in beats {
        let start = (b * sr).round() as usize;
        for k in 0..click_len.min(n.saturating_sub(start)) {
            let t = k as f64 / sr;
            out[start + k] += 0.6 * (-t * 60.0).exp() * (2.0 * PI * 1000.0 * t).sin();
        }
    }
    for v in &mut out {
        *v = v.clamp(-1.0, 1.0);
    }
    out
}

pub fn synth_source(index: usize, opts: &SynthOptions, rng: &SeededRng) -> Result<SynthSource> {
    let mut rng = rng.split(index as u64);
    let style = index % opts.styles.max(1);
    let bpm = 90.0 + 40.0 * rng.uniform();
    let frames = (opts.seconds * opts.pose_fps).round() as usize;
    let poses = dance_sequence(style, bpm, frames, opts.pose_fps, 0.0)?;
    let period = 60.0 / bpm;
    let beats: Vec<f64> = (0..)
        .map(|k| k as f64 * period)
        .take_while(|&t| t < opts.seconds)
        .collect();
    let samples = music(style, &beats, opts.seconds, opts.sample_rate, &mut rng);
    Ok(SynthSource {
        id: format!("toy{index:02}"),
        style,
        bpm,
        poses,
        samples,
        sample_rate: opts.sample_rate,
        beats,
    })
}

/// Style label of a toy source.
pub fn style_name(style: usize) -> String {
    format!("style{style}")
}

/// Writes `poses/<id>.json`, `audio/<id>.wav`, `beats/<id>.txt` and a
/// `labels.json` map from source id to style label under `dir`.
pub fn write_toy_corpus(dir: &Path, opts: &SynthOptions, seed: u64) -> Result<Vec<SynthSource>> {
    if opts.sources == 0 || !(opts.seconds > 0.0) {
        return Err(Error::invalid(
            "toy corpus needs at least one source and positive duration",
        ));
    }
    for sub in ["poses", "audio", "beats"] {
        std::fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let rng = SeededRng::new(seed);
    let mut labels = BTreeMap::new();
    let sources = (0..opts.sources)
        .map(|i| synth_source(i, opts, &rng))
        .collect::<Result<Vec<_>>>()?;
    for s in &sources {
        s.poses
            .save(&dir.join("poses").join(format!("{}.json", s.id)))?;
        write_wav(
            &dir.join("audio").join(format!("{}.wav", s.id)),
            &s.samples,
            s.sample_rate,
        )?;
        let text: String = s.beats.iter().map(|b| format!("{b:.6}\n")).collect();
        write_atomic(
            &dir.join("beats").join(format!("{}.txt", s.id)),
            text.as_bytes(),
        )?;
        labels.insert(s.id.clone(), style_name(s.style));
    }
    write_atomic(
        &dir.join("labels.json"),
        serde_json::to_string_pretty(&labels)?.as_bytes(),
    )?;
    Ok(sources)
}
