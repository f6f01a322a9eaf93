//! Frame-rate conversion by per-coordinate natural cubic splines.

use super::{Outcome, PoseSequence};
use crate::error::{Error, Result};
use crate::numerics::solve_tridiagonal;

/// Number of output frames when converting `len` frames from `src_fps` to
/// `dst_fps`: every target time that falls inside the source time span.
pub fn resampled_len(len: usize, src_fps: f64, dst_fps: f64) -> usize {
    if len == 0 {
        return 0;
    }
    let span = (len - 1) as f64 * dst_fps / src_fps;
    (span + 1e-9).floor() as usize + 1
}

/// Second derivatives of the natural cubic spline through `y` at unit spacing.
fn natural_spline_moments(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let a = vec![1.0; k];
    let b = vec![4.0; k];
    let c = vec![1.0; k];
    let rhs: Vec<f64> = (1..n - 1)
        .map(|i| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]))
        .collect();
    let inner = solve_tridiagonal(&a, &b, &c, &rhs);
    m[1..n - 1].copy_from_slice(&inner);
    m
}

/// Evaluates the natural cubic spline through `y` (unit spacing) at each `x`.
pub fn spline_eval(y: &[f64], xs: &[f64]) -> Vec<f64> {
    let m = natural_spline_moments(y);
    let last = y.len() - 1;
    xs.iter()
        .map(|&x| {
            let i = (x.floor() as usize).min(last.saturating_sub(1));
            if last == 0 {
                return y[0];
            }
            let u = x - i as f64;
            let w = 1.0 - u;
            w * y[i] + u * y[i + 1] + ((w * w * w - w) * m[i] + (u * u * u - u) * m[i + 1]) / 6.0
        })
        .collect()
}

pub fn linear_eval(y: &[f64], xs: &[f64]) -> Vec<f64> {
    let last = y.len() - 1;
    xs.iter()
        .map(|&x| {
            if last == 0 {
                return y[0];
            }
            let i = (x.floor() as usize).min(last - 1);
            let u = x - i as f64;
            (1.0 - u) * y[i] + u * y[i + 1]
        })
        .collect()
}

/// Resamples `seq` to `target_fps`. Identical rates return the input unchanged.
/// Sequences with fewer than 4 frames fall back to linear interpolation.
pub fn resample_to_fps(seq: &PoseSequence, target_fps: f64) -> Result<Outcome<PoseSequence>> {
    if !(target_fps > 0.0 && target_fps.is_finite()) {
        return Err(Error::invalid(format!(
            "target fps must be positive, got {target_fps}"
        )));
    }
    if target_fps == seq.fps() {
        return Ok(Outcome::ok(seq.clone()));
    }
    let n_out = resampled_len(seq.len(), seq.fps(), target_fps);
    let ratio = seq.fps() / target_fps;
    let xs: Vec<f64> = (0..n_out)
        .map(|j| (j as f64 * ratio).min((seq.len() - 1) as f64))
        .collect();
    let mut warnings = Vec::new();
    let cubic = seq.len() >= 4;
    if !cubic {
        warnings.push(format!(
            "{} frames are too few for cubic resampling; used linear interpolation",
            seq.len()
        ));
    }
    let channels: Vec<Vec<f64>> = (0..super::POSE_DIMS)
        .map(|d| {
            let y = seq.channel(d);
            if cubic {
                spline_eval(&y, &xs)
            } else {
                linear_eval(&y, &xs)
            }
        })
        .collect();
    Ok(Outcome {
        value: PoseSequence::from_channels(target_fps, seq.joints().to_vec(), &channels)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_from_fn(t_len: usize, fps: f64, f: impl Fn(f64, usize) -> f64) -> PoseSequence {
        let data = (0..t_len)
            .flat_map(|t| (0..51).map(move |d| (t, d)))
            .map(|(t, d)| f(t as f64 / fps, d))
            .collect();
        PoseSequence::new(fps, data).unwrap()
    }

    #[test]
    fn same_fps_is_bitwise_identity() {
        let s = seq_from_fn(10, 24.0, |t, d| (t * 3.1 + d as f64).sin());
        assert_eq!(resample_to_fps(&s, 24.0).unwrap().value, s);
    }

    #[test]
    fn linear_signal_stays_on_line() {
        let s = seq_from_fn(17, 30.0, |t, d| 0.5 * t * d as f64 - 0.2);
        let out = resample_to_fps(&s, 24.0).unwrap().value;
        assert_eq!(out.len(), resampled_len(17, 30.0, 24.0));
        for t in 0..out.len() {
            for d in 0..51 {
                let time = t as f64 / 24.0;
                assert!((out.frame(t)[d] - (0.5 * time * d as f64 - 0.2)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duration_preserved_within_a_frame() {
        let s = seq_from_fn(91, 30.0, |t, _| t);
        let out = resample_to_fps(&s, 24.0).unwrap().value;
        let src_dur = 90.0 / 30.0;
        let dst_dur = (out.len() - 1) as f64 / 24.0;
        assert!((src_dur - dst_dur).abs() <= 1.0 / 24.0);
    }

    #[test]
    fn short_input_falls_back_to_linear() {
        let s = seq_from_fn(3, 12.0, |t, _| t);
        let out = resample_to_fps(&s, 24.0).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.value.len(), 5);
        assert!((out.value.frame(1)[0] - 1.0 / 24.0).abs() < 1e-12);
    }
}
