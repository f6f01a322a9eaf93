mod common;

use common::oracles::{hp_dense, spline_dense};
use dance_core::audio::AudioFeatureSequence;
use dance_core::motion::skeleton::neutral_pose;
use dance_core::motion::{
    dequantize, fit_quantization_spec, hp_filter, hp_filter_sequence, quantize, resample_to_fps,
    segment_dataset, window_starts, PoseSequence, QuantizationSpec, SegmentOptions, POSE_DIMS,
};
use dance_core::SeededRng;
use proptest::prelude::*;

fn sine_sequence(frames: usize, fps: f64) -> PoseSequence {
    let data = (0..frames * POSE_DIMS)
        .map(|i| {
            let (t, d) = (i / POSE_DIMS, i % POSE_DIMS);
            (0.3 * t as f64 + d as f64).sin()
        })
        .collect();
    PoseSequence::new(fps, data).unwrap()
}

#[test]
fn resample_matches_dense_spline_oracle() {
    let seq = sine_sequence(40, 12.0);
    let out = resample_to_fps(&seq, 24.0).unwrap().value;
    assert_eq!(out.len(), 79);
    for d in [0, 7, 50] {
        let y = seq.channel(d);
        for (j, v) in out.channel(d).iter().enumerate() {
            let x = j as f64 * 0.5;
            assert!((v - spline_dense(&y, x)).abs() < 1e-9, "dim {d} frame {j}");
        }
    }
}

#[test]
fn resample_same_fps_is_bitwise_identity() {
    let seq = sine_sequence(10, 30.0);
    assert_eq!(resample_to_fps(&seq, 30.0).unwrap().value, seq);
}

#[test]
fn resample_reproduces_linear_motion() {
    let data = (0..20 * POSE_DIMS)
        .map(|i| 0.01 * (i / POSE_DIMS) as f64 - 0.002 * (i % POSE_DIMS) as f64)
        .collect();
    let seq = PoseSequence::new(30.0, data).unwrap();
    let out = resample_to_fps(&seq, 24.0).unwrap().value;
    for j in 0..out.len() {
        let t = j as f64 * 30.0 / 24.0;
        for d in 0..POSE_DIMS {
            let expected = 0.01 * t - 0.002 * d as f64;
            assert!((out.frame(j)[d] - expected).abs() < 1e-12);
        }
    }
    assert!((out.len() as f64 / 24.0 - seq.len() as f64 / 30.0).abs() <= 1.0 / 24.0);
}

#[test]
fn short_sequence_resamples_linearly_with_warning() {
    let r = resample_to_fps(&sine_sequence(3, 12.0), 24.0).unwrap();
    assert_eq!(r.warnings.len(), 1);
    assert_eq!(r.value.len(), 5);
}

#[test]
fn hp_sequence_matches_dense_solver_per_channel() {
    let seq = sine_sequence(30, 24.0);
    let out = hp_filter_sequence(&seq, 1.0).unwrap().value;
    for d in [0, 25] {
        let dense = hp_dense(1.0, &seq.channel(d));
        for (a, b) in out.channel(d).iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10);
        }
    }
    let frozen = PoseSequence::from_joint_frames(24.0, &vec![neutral_pose(); 12]).unwrap();
    let f = hp_filter_sequence(&frozen, 1.0).unwrap().value;
    for (a, b) in f.data().iter().zip(frozen.data()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(
        hp_filter_sequence(&sine_sequence(2, 24.0), 1.0)
            .unwrap()
            .warnings
            .len(),
        1
    );
}

#[test]
fn fit_matches_linear_scan() {
    let a = sine_sequence(20, 24.0);
    let b = PoseSequence::new(24.0, a.data().iter().map(|v| v * 2.0 + 0.5).collect()).unwrap();
    let spec = fit_quantization_spec(&[a.clone(), b.clone()], 300).unwrap();
    for d in 0..POSE_DIMS {
        let all: Vec<f64> = a.channel(d).into_iter().chain(b.channel(d)).collect();
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let m = 0.01 * (hi - lo);
        assert!((spec.min[d] - (lo - m)).abs() < 1e-12 && (spec.max[d] - (hi + m)).abs() < 1e-12);
    }
}

fn pair(frames: usize) -> (PoseSequence, AudioFeatureSequence) {
    let pose = sine_sequence(frames, 24.0);
    let audio =
        AudioFeatureSequence::new(24.0, vec![0.0; frames * 26], vec![false; frames]).unwrap();
    (pose, audio)
}

#[test]
fn segmentation_examples() {
    let opts = SegmentOptions::default();
    let (p, a) = pair(960);
    let (q, b) = pair(479);
    let (r, c) = pair(480);
    let set = segment_dataset(
        &[
            ("long".into(), p, a),
            ("short".into(), q, b),
            ("exact".into(), r, c),
        ],
        &opts,
        1,
    )
    .unwrap();
    let starts: Vec<usize> = set
        .segments
        .iter()
        .filter(|s| s.source_id == "long")
        .map(|s| s.start)
        .collect();
    assert_eq!(starts, vec![0, 240, 480]);
    assert_eq!(
        set.segments
            .iter()
            .filter(|s| s.source_id == "exact")
            .count(),
        1
    );
    assert_eq!(set.skipped.len(), 1);
    assert_eq!(set.skipped[0].source_id, "short");
    assert!(set
        .segments
        .iter()
        .all(|s| s.pose.len() == 480 && s.audio.len() == 480));
}

proptest! {
    #[test]
    fn quantize_round_trip_within_half_bin(
        lo in -3.0f64..0.0,
        width in 0.01f64..5.0,
        bins in 2usize..400,
        seed in 0u64..1000,
    ) {
        let spec = QuantizationSpec::uniform(POSE_DIMS, lo, lo + width, bins).unwrap();
        let mut rng = SeededRng::new(seed);
        let data: Vec<f64> = (0..3 * POSE_DIMS).map(|_| lo + width * rng.uniform()).collect();
        let seq = PoseSequence::new(24.0, data).unwrap();
        let q = quantize(&seq, &spec).unwrap();
        prop_assert!(q.warnings.is_empty());
        let back = dequantize(&q.value).unwrap();
        for (a, b) in back.data().iter().zip(seq.data()) {
            prop_assert!((a - b).abs() <= width / (2.0 * bins as f64) + 1e-12);
        }
    }

    #[test]
    fn segments_are_contiguous_and_cover_the_stride_grid(len in 1usize..3000, length in 1usize..600, stride in 1usize..600) {
        let starts = window_starts(len, length, stride);
        for w in starts.windows(2) {
            prop_assert_eq!(w[1] - w[0], stride);
        }
        if len >= length {
            prop_assert_eq!(starts[0], 0);
            let last = *starts.last().unwrap();
            prop_assert!(last + length <= len);
            prop_assert!(last + stride + length > len);
        } else {
            prop_assert!(starts.is_empty());
        }
    }

    #[test]
    fn hp_trend_plus_cycle_reconstructs(y in prop::collection::vec(-10.0f64..10.0, 3..200), lambda in 0.0f64..1000.0) {
        let r = hp_filter(&y, lambda).unwrap().value;
        for ((t, c), v) in r.trend.iter().zip(&r.cyclical).zip(&y) {
            prop_assert!((t + c - v).abs() < 1e-10);
        }
    }
}
