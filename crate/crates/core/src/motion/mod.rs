//! Pose data: sequences, jitter filtering, resampling, quantization and
//! segmentation into training windows.

mod hp;
mod pose;
mod quantize;
mod resample;
mod segment;
pub mod skeleton;

pub use hp::{hp_filter, hp_filter_sequence, HpFilterResult, DEFAULT_HP_LAMBDA};
pub use pose::PoseSequence;
pub use quantize::{
    dequantize, fit_quantization_spec, quantize, quantize_counted, QuantizationSpec,
    QuantizedPoseSequence, DEFAULT_BINS, DEGENERATE_HALF_WIDTH, RANGE_MARGIN,
};
pub use resample::{linear_eval, resample_to_fps, resampled_len, spline_eval};
pub use segment::{
    assign_splits, segment_dataset, window_starts, Segment, SegmentOptions, SegmentSet,
    SkippedSource, Split,
};
pub use skeleton::{NUM_JOINTS, POSE_DIMS};

/// A value plus any non-fatal warnings produced while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T> Outcome<T> {
    pub fn ok(value: T) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }
}
