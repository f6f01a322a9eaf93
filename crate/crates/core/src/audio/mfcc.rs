//! MFCC extraction at the pose frame rate.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MFCC front-end parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfccConfig {
    /// Analysis window and FFT length in samples.
    pub window: usize,
    pub n_mels: usize,
    pub n_coeffs: usize,
    /// Floor applied to mel energies before the log.
    pub log_floor: f64,
    /// Output frame rate.
    pub fps: f64,
    pub min_sample_rate: u32,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            window: 2048,
            n_mels: 40,
            n_coeffs: 13,
            log_floor: 1e-10,
            fps: 24.0,
            min_sample_rate: 8000,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filters spanning 0 Hz to Nyquist, as `n_mels` rows over the
/// `window / 2 + 1` FFT bins.
pub fn mel_filterbank(n_mels: usize, window: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let n_bins = window / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / window as f64;
                    let up = (f - lo) / (mid - lo);
                    let down = (hi - f) / (hi - mid);
                    up.min(down).max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Orthonormal DCT-II of `x`, first `k` coefficients.
pub fn dct2(x: &[f64], k: usize) -> Vec<f64> {
    let m = x.len() as f64;
    (0..k)
        .map(|c| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    v * (std::f64::consts::PI * c as f64 * (2 * i + 1) as f64 / (2.0 * m)).cos()
                })
                .sum();
            let norm = if c == 0 {
                (1.0 / m).sqrt()
            } else {
                (2.0 / m).sqrt()
            };
            s * norm
        })
        .collect()
}

/// First sample of analysis frame `t`. Rounding per frame keeps the
/// fractional hop (e.g. 1837.5 samples at 44.1 kHz / 24 fps) from drifting.
pub fn frame_start(t: usize, sample_rate: u32, fps: f64) -> usize {
    (t as f64 * sample_rate as f64 / fps).round() as usize
}

/// Number of complete analysis frames in `len` samples.
pub fn frame_count(len: usize, sample_rate: u32, cfg: &MfccConfig) -> usize {
    if len < cfg.window {
        return 0;
    }
    let hop = sample_rate as f64 / cfg.fps;
    let mut n = ((len - cfg.window) as f64 / hop).floor() as usize + 1;
    while n > 0 && frame_start(n - 1, sample_rate, cfg.fps) + cfg.window > len {
        n -= 1;
    }
    while frame_start(n, sample_rate, cfg.fps) + cfg.window <= len {
        n += 1;
    }
    n
}

/// Static MFCCs, one row of `n_coeffs` per output frame.
///
/// With `target_frames`, the result is truncated or edge-padded (last row
/// repeated) to exactly that many rows.
pub fn compute_mfcc(
    samples: &[f64],
    sample_rate: u32,
    cfg: &MfccConfig,
    target_frames: Option<usize>,
) -> Result<Vec<Vec<f64>>> {
    if sample_rate < cfg.min_sample_rate {
        return Err(Error::invalid(format!(
            "sample rate {sample_rate} Hz is below the minimum {} Hz",
            cfg.min_sample_rate
        )));
    }
    let n = frame_count(samples.len(), sample_rate, cfg);
    if n == 0 {
        return Err(Error::invalid(format!(
            "audio has {} samples, fewer than one {}-sample window",
            samples.len(),
            cfg.window
        )));
    }
    let window = hann(cfg.window);
    let bank = mel_filterbank(cfg.n_mels, cfg.window, sample_rate);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.window);
    let n_bins = cfg.window / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.window];
    let mut rows = Vec::with_capacity(n);
    for t in 0..n {
        let start = frame_start(t, sample_rate, cfg.fps);
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        let mag: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm()).collect();
        let log_mel: Vec<f64> = bank
            .iter()
            .map(|w| {
                let e: f64 = w.iter().zip(&mag).map(|(a, b)| a * b).sum();
                e.max(cfg.log_floor).ln()
            })
            .collect();
        rows.push(dct2(&log_mel, cfg.n_coeffs));
    }
    if let Some(target) = target_frames {
        if target == 0 {
            return Err(Error::invalid("target frame count must be positive"));
        }
        let last = rows[rows.len() - 1].clone();
        rows.resize(target, last);
    }
    Ok(rows)
}

/// Appends central-difference deltas: `Δ_t = (f_{t+1} - f_{t-1}) / 2` with
/// edge replication, so a single frame gets zero deltas.
pub fn append_deltas(statics: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = statics.len();
    (0..n)
        .map(|t| {
            let prev = &statics[t.saturating_sub(1)];
            let next = &statics[(t + 1).min(n - 1)];
            let mut row = statics[t].clone();
            row.extend(next.iter().zip(prev).map(|(a, b)| (a - b) / 2.0));
            row
        })
        .collect()
}
