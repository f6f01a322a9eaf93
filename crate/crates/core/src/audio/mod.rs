//! Per-frame audio conditioning: MFCC statics plus deltas and a binary beat
//! signal, both at the pose frame rate.

mod beats;
mod cache;
mod features;
mod mfcc;
mod wav;

pub use beats::{load_beat_annotations, rasterize_beats, BeatTrack};
pub use cache::{read_feature_csv, write_feature_csv};
pub use features::{AudioFeatureSequence, FeatureStats, FEATURE_DIMS};
pub use mfcc::{
    append_deltas, compute_mfcc, dct2, frame_count, frame_start, hann, mel_filterbank, MfccConfig,
};
pub use wav::{read_wav, write_wav};

use std::path::Path;

use crate::error::Result;

/// Full feature extraction for one WAV file and its beat annotations,
/// aligned to `target_frames` output rows.
pub fn extract_features(
    wav_path: &Path,
    beats: &BeatTrack,
    cfg: &MfccConfig,
    target_frames: Option<usize>,
) -> Result<AudioFeatureSequence> {
    let (samples, sample_rate) = read_wav(wav_path)?;
    let statics = compute_mfcc(&samples, sample_rate, cfg, target_frames)?;
    let rows = append_deltas(&statics);
    let beat = rasterize_beats(beats, cfg.fps, rows.len());
    AudioFeatureSequence::from_rows(cfg.fps, &rows, beat)
}
