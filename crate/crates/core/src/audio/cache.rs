use std::path::Path;

use super::features::{AudioFeatureSequence, FEATURE_DIMS};
use crate::error::{Error, Result};

/// Writes one CSV row per frame: 26 feature columns followed by the beat
/// flag as 0/1. No header. The file is replaced atomically.
pub fn write_feature_csv(path: &Path, seq: &AudioFeatureSequence) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for t in 0..seq.len() {
        let mut rec: Vec<String> = seq.row(t).iter().map(|v| format!("{v:?}")).collect();
        rec.push(if seq.beat()[t] { "1" } else { "0" }.to_string());
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    crate::fsutil::write_atomic(path, &bytes)
}

pub fn read_feature_csv(path: &Path, fps: f64) -> Result<AudioFeatureSequence> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut mfcc = Vec::new();
    let mut beat = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 1;
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if rec.len() != FEATURE_DIMS + 1 {
            return Err(err(format!(
                "expected {} columns, got {}",
                FEATURE_DIMS + 1,
                rec.len()
            )));
        }
        for field in rec.iter().take(FEATURE_DIMS) {
            mfcc.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| err(format!("not a number: {field:?}")))?,
            );
        }
        beat.push(match rec[FEATURE_DIMS].trim() {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("beat flag must be 0 or 1, got {other:?}"))),
        });
    }
    AudioFeatureSequence::new(fps, mfcc, beat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let mfcc: Vec<f64> = (0..3 * FEATURE_DIMS)
            .map(|i| (i as f64).sqrt() / 3.0 - 1.0)
            .collect();
        let s = AudioFeatureSequence::new(24.0, mfcc, vec![true, false, true]).unwrap();
        write_feature_csv(&p, &s).unwrap();
        assert_eq!(read_feature_csv(&p, 24.0).unwrap(), s);
    }

    #[test]
    fn bad_column_count_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, format!("{}\n1,2\n", vec!["0"; 27].join(","))).unwrap();
        let e = read_feature_csv(&p, 24.0).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
    }
}
