//! Uniform per-dimension discretization of pose coordinates.

use serde::{Deserialize, Serialize};

use super::{Outcome, PoseSequence, POSE_DIMS};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 300;
/// Fraction of the observed range added on each side when fitting.
pub const RANGE_MARGIN: f64 = 0.01;
/// Half-width used for dimensions that never vary in the corpus.
pub const DEGENERATE_HALF_WIDTH: f64 = 1e-3;

/// Value range and bin count for each coordinate dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizationSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub bins: usize,
}

impl QuantizationSpec {
    pub fn new(min: Vec<f64>, max: Vec<f64>, bins: usize) -> Result<Self> {
        let spec = Self { min, max, bins };
        spec.validate()?;
        Ok(spec)
    }

    /// Same range `[lo, hi]` for all `dims` dimensions.
    pub fn uniform(dims: usize, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        Self::new(vec![lo; dims], vec![hi; dims], bins)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::invalid(format!(
                "bins must be >= 2, got {}",
                self.bins
            )));
        }
        if self.min.len() != self.max.len() || self.min.is_empty() {
            return Err(Error::invalid(
                "quantization min/max lengths differ or are empty",
            ));
        }
        for (d, (lo, hi)) in self.min.iter().zip(&self.max).enumerate() {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!(
                    "dimension {d}: max {hi} must exceed min {lo}"
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.min.len()
    }

    pub fn bin_width(&self, d: usize) -> f64 {
        (self.max[d] - self.min[d]) / self.bins as f64
    }

    /// Token of value `v` in dimension `d` and whether it had to be clamped.
    pub fn token(&self, d: usize, v: f64) -> (usize, bool) {
        let (lo, hi) = (self.min[d], self.max[d]);
        let raw = ((v - lo) / (hi - lo) * self.bins as f64).floor();
        let clamped = v < lo || v > hi;
        let tok = if raw < 0.0 {
            0
        } else {
            (raw as usize).min(self.bins - 1)
        };
        (tok, clamped)
    }

    /// Bin centre of `token` in dimension `d`.
    pub fn value(&self, d: usize, token: usize) -> Result<f64> {
        if token >= self.bins {
            return Err(Error::invalid(format!(
                "token {token} out of range [0, {})",
                self.bins
            )));
        }
        Ok(self.min[d] + (token as f64 + 0.5) * self.bin_width(d))
    }

    /// Tokens of one frame (`dims` values).
    pub fn quantize_frame(&self, frame: &[f64]) -> Vec<usize> {
        frame
            .iter()
            .enumerate()
            .map(|(d, &v)| self.token(d, v).0)
            .collect()
    }
}

/// `T × dims` token matrix together with the spec that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPoseSequence {
    tokens: Vec<usize>,
    spec: QuantizationSpec,
    fps: f64,
}

impl QuantizedPoseSequence {
    pub fn new(tokens: Vec<usize>, spec: QuantizationSpec, fps: f64) -> Result<Self> {
        spec.validate()?;
        if tokens.is_empty() || !tokens.len().is_multiple_of(spec.dims()) {
            return Err(Error::invalid(format!(
                "token count {} is not a positive multiple of {}",
                tokens.len(),
                spec.dims()
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= spec.bins) {
            return Err(Error::invalid(format!(
                "token {bad} out of range [0, {})",
                spec.bins
            )));
        }
        Ok(Self { tokens, spec, fps })
    }

    pub fn tokens(&self) -> &[usize] {
        &self.tokens
    }

    pub fn spec(&self) -> &QuantizationSpec {
        &self.spec
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.tokens.len() / self.spec.dims()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[usize] {
        let d = self.spec.dims();
        &self.tokens[t * d..(t + 1) * d]
    }
}

/// Per-dimension min/max over the corpus, widened by 1% of the range on each
/// side. Dimensions with zero range get `±1e-3` around their value.
pub fn fit_quantization_spec(corpus: &[PoseSequence], bins: usize) -> Result<QuantizationSpec> {
    if corpus.is_empty() {
        return Err(Error::invalid(
            "cannot fit a quantization spec on an empty corpus",
        ));
    }
    let mut lo = vec![f64::INFINITY; POSE_DIMS];
    let mut hi = vec![f64::NEG_INFINITY; POSE_DIMS];
    for seq in corpus {
        for frame in seq.data().chunks(POSE_DIMS) {
            for (d, &v) in frame.iter().enumerate() {
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
    }
    for d in 0..POSE_DIMS {
        let range = hi[d] - lo[d];
        if range > 0.0 {
            lo[d] -= RANGE_MARGIN * range;
            hi[d] += RANGE_MARGIN * range;
        } else {
            let c = lo[d];
            lo[d] = c - DEGENERATE_HALF_WIDTH;
            hi[d] = c + DEGENERATE_HALF_WIDTH;
        }
    }
    QuantizationSpec::new(lo, hi, bins)
}

/// Discretizes every coordinate. The warning lists how many values were
/// clamped into range.
pub fn quantize(
    seq: &PoseSequence,
    spec: &QuantizationSpec,
) -> Result<Outcome<QuantizedPoseSequence>> {
    let (value, clamped) = quantize_counted(seq, spec)?;
    let mut warnings = Vec::new();
    if clamped > 0 {
        warnings.push(format!(
            "{clamped} values outside the quantization range were clamped"
        ));
    }
    Ok(Outcome { value, warnings })
}

/// Like [`quantize`], returning the number of clamped values directly.
pub fn quantize_counted(
    seq: &PoseSequence,
    spec: &QuantizationSpec,
) -> Result<(QuantizedPoseSequence, usize)> {
    spec.validate()?;
    if spec.dims() != POSE_DIMS {
        return Err(Error::invalid(format!(
            "quantization spec has {} dims, poses have {POSE_DIMS}",
            spec.dims()
        )));
    }
    let mut clamped = 0usize;
    let tokens = seq
        .data()
        .chunks(POSE_DIMS)
        .flat_map(|f| f.iter().enumerate())
        .map(|(d, &v)| {
            let (t, c) = spec.token(d, v);
            clamped += c as usize;
            t
        })
        .collect();
    Ok((
        QuantizedPoseSequence::new(tokens, spec.clone(), seq.fps())?,
        clamped,
    ))
}

/// Maps tokens back to bin centres.
pub fn dequantize(q: &QuantizedPoseSequence) -> Result<PoseSequence> {
    let spec = q.spec();
    let dims = spec.dims();
    let data = q
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, &t)| spec.value(i % dims, t))
        .collect::<Result<Vec<_>>>()?;
    PoseSequence::new(q.fps(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_spec() -> QuantizationSpec {
        QuantizationSpec::uniform(1, -1.0, 1.0, 300).unwrap()
    }

    #[test]
    fn boundary_tokens() {
        let s = unit_spec();
        assert_eq!(s.token(0, -1.0), (0, false));
        assert_eq!(s.token(0, 1.0), (299, false));
        assert_eq!(s.token(0, 0.0), (150, false));
        assert_eq!(s.token(0, 7.0), (299, true));
        assert_eq!(s.token(0, -7.0), (0, true));
    }

    #[test]
    fn bin_centres() {
        let s = unit_spec();
        assert!((s.value(0, 0).unwrap() - (-0.996_666_666_666_666_7)).abs() < 1e-12);
        assert!((s.value(0, 299).unwrap() - 0.996_666_666_666_666_7).abs() < 1e-12);
        assert!(s.value(0, 300).is_err());
    }

    #[test]
    fn fit_adds_margin_and_handles_degenerate() {
        let mut frames = vec![0.5; 2 * POSE_DIMS];
        frames[0] = -1.0;
        frames[POSE_DIMS] = 1.0;
        let seq = PoseSequence::new(24.0, frames).unwrap();
        let spec = fit_quantization_spec(&[seq], 300).unwrap();
        assert!((spec.min[0] + 1.02).abs() < 1e-12 && (spec.max[0] - 1.02).abs() < 1e-12);
        assert!((spec.min[1] - (0.5 - 1e-3)).abs() < 1e-12);
        assert!((spec.max[1] - (0.5 + 1e-3)).abs() < 1e-12);
    }

    #[test]
    fn invalid_spec_rejected() {
        assert!(QuantizationSpec::uniform(3, 1.0, 1.0, 300).is_err());
        assert!(QuantizationSpec::uniform(3, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn clamp_count_reported() {
        let spec = QuantizationSpec::uniform(POSE_DIMS, -1.0, 1.0, 300).unwrap();
        let mut frame = vec![0.0; POSE_DIMS];
        frame[3] = 5.0;
        frame[4] = -5.0;
        let q = quantize(&PoseSequence::new(24.0, frame).unwrap(), &spec).unwrap();
        assert!(q.warnings[0].starts_with("2 values"));
    }
}
