use std::f64::consts::PI;

use dance_core::audio::{
    append_deltas, compute_mfcc, frame_start, load_beat_annotations, rasterize_beats,
    read_feature_csv, read_wav, write_feature_csv, write_wav, AudioFeatureSequence, BeatTrack,
    MfccConfig,
};
use proptest::prelude::*;

/// One MFCC frame by naive DFT, hand-built HTK mel filters and a direct
/// orthonormal DCT-II.
fn naive_mfcc_frame(x: &[f64], sr: f64, n_mels: usize, n_coeffs: usize) -> Vec<f64> {
    let n = x.len();
    let mag: Vec<f64> = (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in x.iter().enumerate() {
                let w = 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos());
                let ang = -2.0 * PI * (k * i % n) as f64 / n as f64;
                re += v * w * ang.cos();
                im += v * w * ang.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect();
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(sr / 2.0);
    let pts: Vec<f64> = (0..n_mels + 2)
        .map(|i| hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let energies: Vec<f64> = (0..n_mels)
        .map(|m| {
            let mut e = 0.0;
            for (k, a) in mag.iter().enumerate() {
                let f = k as f64 * sr / n as f64;
                let w = if f > pts[m] && f <= pts[m + 1] {
                    (f - pts[m]) / (pts[m + 1] - pts[m])
                } else if f > pts[m + 1] && f < pts[m + 2] {
                    (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1])
                } else {
                    0.0
                };
                e += w * a;
            }
            e.max(1e-10).ln()
        })
        .collect();
    (0..n_coeffs)
        .map(|c| {
            let s: f64 = energies
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * c as f64 * (i as f64 + 0.5) / n_mels as f64).cos())
                .sum();
            s * if c == 0 {
                (1.0 / n_mels as f64).sqrt()
            } else {
                (2.0 / n_mels as f64).sqrt()
            }
        })
        .collect()
}

#[test]
fn sine_matches_naive_dft_oracle() {
    let sr = 44_100u32;
    let samples: Vec<f64> = (0..sr as usize / 4)
        .map(|i| 0.5 * (2.0 * PI * 440.0 * i as f64 / sr as f64).sin())
        .collect();
    let cfg = MfccConfig::default();
    let rows = compute_mfcc(&samples, sr, &cfg, None).unwrap();
    for t in [0, 2, rows.len() - 1] {
        let s = frame_start(t, sr, 24.0);
        let oracle = naive_mfcc_frame(&samples[s..s + 2048], sr as f64, 40, 13);
        for (a, b) in rows[t].iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "frame {t}: {a} vs {b}");
        }
    }
}

#[test]
fn mfcc_is_shift_covariant_at_48k() {
    let sr = 48_000u32;
    let hop = 2000;
    let samples: Vec<f64> = (0..sr as usize / 2)
        .map(|i| {
            let t = i as f64 / sr as f64;
            (2.0 * PI * 330.0 * t).sin() + 0.3 * (2.0 * PI * 1250.0 * t * (1.0 + t)).sin()
        })
        .collect();
    let cfg = MfccConfig::default();
    let a = compute_mfcc(&samples, sr, &cfg, None).unwrap();
    let b = compute_mfcc(&samples[hop..], sr, &cfg, None).unwrap();
    for t in 0..b.len() - 1 {
        for (x, y) in b[t].iter().zip(&a[t + 1]) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn mfcc_is_deterministic_and_rejects_bad_input() {
    let cfg = MfccConfig::default();
    let s: Vec<f64> = (0..6000)
        .map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5)
        .collect();
    assert_eq!(
        compute_mfcc(&s, 16000, &cfg, None).unwrap(),
        compute_mfcc(&s, 16000, &cfg, None).unwrap()
    );
    assert!(compute_mfcc(&s[..100], 16000, &cfg, None).is_err());
    assert!(compute_mfcc(&s, 4000, &cfg, None).is_err());
    let padded = compute_mfcc(&s, 16000, &cfg, Some(20)).unwrap();
    assert_eq!(padded.len(), 20);
    assert_eq!(padded[19], padded[padded.len() - 2]);
}

#[test]
fn deltas_of_linear_features() {
    let rows: Vec<Vec<f64>> = (0..6).map(|t| vec![2.0 * t as f64, 1.0]).collect();
    let out = append_deltas(&rows);
    for t in 1..5 {
        assert_eq!(&out[t][..2], &rows[t][..]);
        assert_eq!(out[t][2], 2.0);
        assert_eq!(out[t][3], 0.0);
    }
    assert_eq!(out[0][2], 1.0);
    assert_eq!(append_deltas(&[vec![3.0]]), vec![vec![3.0, 0.0]]);
}

#[test]
fn random_deltas_match_enumeration() {
    let rows = vec![vec![0.3], vec![-1.2], vec![2.5], vec![0.0], vec![4.0]];
    let expected = [
        (-1.2 - 0.3) / 2.0,
        (2.5 - 0.3) / 2.0,
        (0.0 + 1.2) / 2.0,
        (4.0 - 2.5) / 2.0,
        (4.0 - 0.0) / 2.0,
    ];
    for (r, e) in append_deltas(&rows).iter().zip(expected) {
        assert!((r[1] - e).abs() < 1e-15);
    }
}

#[test]
fn beat_rasterization() {
    let track = BeatTrack::new(vec![0.5, 1.0, 9.0]).unwrap();
    let b = rasterize_beats(&track, 24.0, 48);
    let on: Vec<usize> = (0..48).filter(|&i| b[i]).collect();
    assert_eq!(on, vec![12, 24]);
    assert!(rasterize_beats(&BeatTrack::new(vec![]).unwrap(), 24.0, 10)
        .iter()
        .all(|v| !v));
}

#[test]
fn beat_files() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.txt");
    std::fs::write(&ok, "0.5\n1.0\n").unwrap();
    assert_eq!(load_beat_annotations(&ok).unwrap().times(), &[0.5, 1.0]);
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1.0\n0.5\n").unwrap();
    assert!(load_beat_annotations(&bad)
        .unwrap_err()
        .to_string()
        .contains("line 2"));
    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert!(load_beat_annotations(&empty).unwrap().is_empty());
}

#[test]
fn wav_and_feature_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("a.wav");
    let s: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.01).sin() * 0.5).collect();
    write_wav(&wav, &s, 16000).unwrap();
    let (back, sr) = read_wav(&wav).unwrap();
    assert_eq!(sr, 16000);
    for (a, b) in back.iter().zip(&s) {
        assert!((a - b).abs() < 1.0 / 32000.0);
    }

    let rows: Vec<Vec<f64>> = (0..4)
        .map(|t| (0..26).map(|d| (t * 26 + d) as f64 / 7.0).collect())
        .collect();
    let seq = AudioFeatureSequence::from_rows(24.0, &rows, vec![true, false, false, true]).unwrap();
    let csv = dir.path().join("f.csv");
    write_feature_csv(&csv, &seq).unwrap();
    assert_eq!(read_feature_csv(&csv, 24.0).unwrap(), seq);
}

proptest! {
    #[test]
    fn rasterized_count_bounded_by_track(mut times in prop::collection::vec(0.0f64..30.0, 0..40), len in 1usize..800) {
        times.sort_by(f64::total_cmp);
        times.dedup();
        let track = BeatTrack::new(times.clone()).unwrap();
        let n = rasterize_beats(&track, 24.0, len).iter().filter(|b| **b).count();
        prop_assert!(n <= times.len());
    }
}
