use std::path::Path;

use super::kinematics::{joint_angles, JointAngles};
use crate::error::{Error, Result};
use crate::motion::PoseSequence;

/// Strictly increasing frame indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BeatSequence {
    frames: Vec<usize>,
}

impl BeatSequence {
    pub fn new(frames: Vec<usize>) -> Result<Self> {
        if frames.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("beat frames must be strictly increasing"));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// One frame index per line.
    pub fn to_text(&self) -> String {
        self.frames.iter().map(|f| format!("{f}\n")).collect()
    }

    /// Parses the [`to_text`](Self::to_text) format. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut frames = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            frames.push(
                line.parse::<usize>()
                    .map_err(|e| Error::invalid(format!("line {}: {e}: {line:?}", i + 1)))?,
            );
        }
        Self::new(frames)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

/// Aggregate angular speed `s_t = fps · Σ_j |θ_{j,t} − θ_{j,t−1}|` for
/// `t = 1..T`; entry `i` holds `s_{i+1}`.
pub fn aggregate_speed(angles: &JointAngles) -> Vec<f64> {
    (1..angles.len())
        .map(|t| {
            angles
                .frame(t)
                .iter()
                .zip(angles.frame(t - 1))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                * angles.fps
        })
        .collect()
}

/// Accelerations within this fraction of the peak aggregate speed count as
/// zero, so rounding noise on constant-speed motion yields no beats.
pub const ACCEL_REL_TOL: f64 = 1e-9;

/// Motion beats from joint angles: frames `t` where the discrete
/// acceleration `a_t = s_{t+1} − s_t` crosses from negative to non-negative,
/// i.e. local minima of aggregate speed.
pub fn motion_beats_from_angles(angles: &JointAngles) -> BeatSequence {
    let s = aggregate_speed(angles);
    let tol = ACCEL_REL_TOL * s.iter().copied().fold(0.0, f64::max);
    // s[i] = s_{i+1}; a_t = s_{t+1} - s_t = s[t] - s[t-1]
    let accel = |t: usize| {
        let a = s[t] - s[t - 1];
        if a.abs() <= tol {
            0.0
        } else {
            a
        }
    };
    let frames = (2..angles.len().saturating_sub(1))
        .filter(|&t| accel(t - 1) < 0.0 && accel(t) >= 0.0)
        .collect();
    BeatSequence { frames }
}

pub fn extract_motion_beats(seq: &PoseSequence) -> BeatSequence {
    motion_beats_from_angles(&joint_angles(seq))
}

/// Precision, recall and F-score of beat alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatScores {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub matches: usize,
}

/// Number of one-to-one matches within `tolerance` frames, assigning each
/// reference beat (ascending) the earliest unmatched candidate in its window.
pub fn greedy_matches(reference: &[usize], candidate: &[usize], tolerance: usize) -> usize {
    let mut j = 0;
    let mut matches = 0;
    for &r in reference {
        while j < candidate.len() && candidate[j] + tolerance < r {
            j += 1;
        }
        if j < candidate.len() && candidate[j] <= r + tolerance {
            matches += 1;
            j += 1;
        }
    }
    matches
}

/// Scores `candidate` against `reference`. Two empty sequences agree
/// perfectly; otherwise an empty side gives zero for the affected ratio.
pub fn beat_scores(
    reference: &BeatSequence,
    candidate: &BeatSequence,
    tolerance: usize,
) -> BeatScores {
    if reference.is_empty() && candidate.is_empty() {
        return BeatScores {
            precision: 1.0,
            recall: 1.0,
            f_score: 1.0,
            matches: 0,
        };
    }
    let m = greedy_matches(reference.frames(), candidate.frames(), tolerance);
    let ratio = |n: usize| if n == 0 { 0.0 } else { m as f64 / n as f64 };
    let precision = ratio(candidate.len());
    let recall = ratio(reference.len());
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    BeatScores {
        precision,
        recall,
        f_score,
        matches: m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: &[usize]) -> BeatSequence {
        BeatSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn text_round_trip() {
        let beats = b(&[0, 7, 30]);
        assert_eq!(BeatSequence::from_text(&beats.to_text()).unwrap(), beats);
        assert_eq!(
            BeatSequence::from_text("# beats\n\n4\n9\n").unwrap(),
            b(&[4, 9])
        );
        assert!(BeatSequence::from_text("4\n4\n").is_err());
        assert!(BeatSequence::from_text("1.5\n").is_err());
    }

    #[test]
    fn hand_case() {
        let s = beat_scores(&b(&[10, 20, 30]), &b(&[11, 19, 35]), 2);
        assert_eq!(s.matches, 2);
        assert_eq!(s.precision, 2.0 / 3.0);
        assert_eq!(s.recall, 2.0 / 3.0);
        assert!((s.f_score - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_conventions() {
        let e = b(&[]);
        assert_eq!(beat_scores(&e, &e, 2).f_score, 1.0);
        let s = beat_scores(&b(&[3]), &e, 2);
        assert_eq!((s.precision, s.recall, s.f_score), (0.0, 0.0, 0.0));
        assert_eq!(beat_scores(&e, &b(&[3]), 2).f_score, 0.0);
    }

    #[test]
    fn identical_is_perfect() {
        let x = b(&[1, 5, 9, 40]);
        let s = beat_scores(&x, &x, 2);
        assert_eq!((s.precision, s.recall, s.f_score), (1.0, 1.0, 1.0));
    }

    #[test]
    fn rejects_unsorted() {
        assert!(BeatSequence::new(vec![3, 3]).is_err());
    }
}
