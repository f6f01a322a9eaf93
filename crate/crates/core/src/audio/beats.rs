use std::path::Path;

use crate::error::{Error, Result};

/// Ascending beat times in seconds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeatTrack {
    times: Vec<f64>,
}

impl BeatTrack {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        for (i, &t) in times.iter().enumerate() {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::invalid(format!("beat {i} has invalid time {t}")));
            }
            if i > 0 && t <= times[i - 1] {
                return Err(Error::invalid(format!(
                    "beat {i} at {t} s does not follow {} s",
                    times[i - 1]
                )));
            }
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Parses one time (seconds) per line; blank lines are ignored.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut times = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let s = line.trim();
            if s.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                msg,
            };
            let t: f64 = s
                .parse()
                .map_err(|_| parse_err(format!("not a number: {s:?}")))?;
            if !(t >= 0.0 && t.is_finite()) {
                return Err(parse_err(format!(
                    "beat time {t} is negative or not finite"
                )));
            }
            if let Some(&prev) = times.last() {
                if t <= prev {
                    return Err(parse_err(format!("beat time {t} does not follow {prev}")));
                }
            }
            times.push(t);
        }
        Ok(Self { times })
    }
}

pub fn load_beat_annotations(path: &Path) -> Result<BeatTrack> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BeatTrack::parse(&text, path)
}

/// Binary per-frame beat signal: frame `round(time * fps)` is set for every
/// beat that lands inside `0..len`.
pub fn rasterize_beats(track: &BeatTrack, fps: f64, len: usize) -> Vec<bool> {
    let mut out = vec![false; len];
    for &t in track.times() {
        let f = (t * fps).round() as usize;
        if f < len {
            out[f] = true;
        }
    }
    out
}
