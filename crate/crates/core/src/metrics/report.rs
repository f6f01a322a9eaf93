use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beats::{beat_scores, extract_motion_beats, BeatScores, BeatSequence};
use super::classifier::StyleClassifier;
use super::diversity::{
    a_seq_d, chunk_starts, group_by_music, i_seq_d, music_key, s_music_d, Aggregate,
    DiversityConfig,
};
use super::fid::fid;
use super::plausibility::{authenticity, coherence, JointLimitTable};
use crate::error::{Error, Result};
use crate::motion::PoseSequence;

/// JSON schema of [`MetricReport`].
pub const METRIC_REPORT_SCHEMA: &str = include_str!("../../schema/metric_report.schema.json");

/// A sequence to evaluate. Generated names follow `<music>__<index>`; the
/// music key links a generation to its reference and to its music beats.
#[derive(Debug, Clone)]
pub struct NamedSequence {
    pub name: String,
    pub poses: PoseSequence,
    /// Beats of the accompanying music, in frames.
    pub music_beats: Option<BeatSequence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationOptions {
    pub beat_tolerance: usize,
    pub diversity: DiversityConfig,
    pub seed: u64,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        Self {
            beat_tolerance: 2,
            diversity: DiversityConfig::default(),
            seed: 0,
        }
    }
}

/// Beat scores averaged over the compared pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatSummary {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub pairs: usize,
}

impl BeatSummary {
    fn mean(scores: &[BeatScores]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let n = scores.len() as f64;
        Some(Self {
            precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
            f_score: scores.iter().map(|s| s.f_score).sum::<f64>() / n,
            pairs: scores.len(),
        })
    }
}

/// All evaluation scores for one batch of generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricReport {
    pub generated: usize,
    pub reference: usize,
    pub authenticity: f64,
    pub coherence: f64,
    /// Generated motion beats against reference motion beats.
    pub motion_beats: Option<BeatSummary>,
    /// Generated motion beats against music beats.
    pub music_beats: Option<BeatSummary>,
    pub fid: Option<f64>,
    pub a_seq_d: Option<Aggregate>,
    pub i_seq_d: Option<Aggregate>,
    pub s_music_d: Option<Aggregate>,
    pub options: EvaluationOptions,
    pub warnings: Vec<String>,
}

fn truncate(b: &BeatSequence, len: usize) -> BeatSequence {
    BeatSequence::new(b.frames().iter().copied().filter(|&f| f < len).collect())
        .expect("subsequence stays sorted")
}

/// Evaluates `generated` against `reference`. Feature-based scores need a
/// classifier and are `None` without one.
pub fn evaluate(
    generated: &[NamedSequence],
    reference: &[NamedSequence],
    limits: &JointLimitTable,
    classifier: Option<&StyleClassifier>,
    options: &EvaluationOptions,
) -> Result<MetricReport> {
    if generated.is_empty() {
        return Err(Error::invalid("no generated sequences to evaluate"));
    }
    limits.validate()?;
    let mut warnings = Vec::new();

    let plaus = generated
        .par_iter()
        .map(|s| {
            Ok((
                authenticity(&s.poses, limits)?,
                coherence(&s.poses, limits)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = plaus.len() as f64;
    let auth = plaus.iter().map(|p| p.0).sum::<f64>() / n;
    let coh = plaus.iter().map(|p| p.1).sum::<f64>() / n;

    let gen_beats: Vec<BeatSequence> = generated
        .par_iter()
        .map(|s| extract_motion_beats(&s.poses))
        .collect();
    let mut motion_pairs = Vec::new();
    let mut music_pairs = Vec::new();
    for (s, beats) in generated.iter().zip(&gen_beats) {
        let key = music_key(&s.name);
        if let Some(r) = reference.iter().find(|r| music_key(&r.name) == key) {
            let len = s.poses.len().min(r.poses.len());
            let rb = extract_motion_beats(&r.poses);
            motion_pairs.push(beat_scores(
                &truncate(&rb, len),
                &truncate(beats, len),
                options.beat_tolerance,
            ));
        }
        if let Some(mb) = &s.music_beats {
            let len = s.poses.len();
            music_pairs.push(beat_scores(
                &truncate(mb, len),
                beats,
                options.beat_tolerance,
            ));
        }
    }
    if motion_pairs.is_empty() && !reference.is_empty() {
        warnings.push(
            "no generated sequence shares a music key with a reference; motion-beat scores skipped"
                .into(),
        );
    }

    let (mut fid_value, mut a, mut i, mut s) = (None, None, None, None);
    match classifier {
        Some(c) => {
            let gen_seqs: Vec<PoseSequence> = generated.iter().map(|g| g.poses.clone()).collect();
            let gen_feats = c.features_batch(&gen_seqs)?;
            if !reference.is_empty() {
                let ref_seqs: Vec<PoseSequence> =
                    reference.iter().map(|r| r.poses.clone()).collect();
                let ref_feats = c.features_batch(&ref_seqs)?;
                let f = fid(&ref_feats, &gen_feats)?;
                warnings.extend(f.warnings);
                fid_value = Some(f.value);
            }
            a = Some(a_seq_d(&gen_feats, options.diversity.pairs, options.seed));
            let chunk = options.diversity.chunk_frames;
            let chunk_feats = generated
                .par_iter()
                .map(|g| {
                    chunk_starts(g.poses.len(), chunk)
                        .into_iter()
                        .map(|st| c.features(&g.poses.slice(st, st + chunk)?))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            i = Some(i_seq_d(&chunk_feats));
            let groups: Vec<Vec<Vec<f64>>> =
                group_by_music(generated.iter().map(|g| g.name.as_str()))
                    .into_iter()
                    .map(|idx| idx.into_iter().map(|k| gen_feats[k].clone()).collect())
                    .collect();
            s = Some(s_music_d(&groups));
            for (name, agg) in [("A-seq-D", &a), ("I-seq-D", &i), ("S-music-D", &s)] {
                if agg.is_some_and(|g| !g.defined) {
                    warnings.push(format!(
                        "{name} is undefined for these inputs and reported as 0"
                    ));
                }
            }
        }
        None => warnings.push("no style classifier given; FID and diversity scores skipped".into()),
    }

    let report = MetricReport {
        generated: generated.len(),
        reference: reference.len(),
        authenticity: auth,
        coherence: coh,
        motion_beats: BeatSummary::mean(&motion_pairs),
        music_beats: BeatSummary::mean(&music_pairs),
        fid: fid_value,
        a_seq_d: a,
        i_seq_d: i,
        s_music_d: s,
        options: options.clone(),
        warnings,
    };
    report.check_ranges()?;
    Ok(report)
}

impl MetricReport {
    /// Verifies that every score lies in its declared range.
    pub fn check_ranges(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Numeric(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Numeric(format!(
                    "{name} = {v} is negative or not finite"
                )))
            }
        };
        unit("authenticity", self.authenticity)?;
        unit("coherence", self.coherence)?;
        for b in [&self.motion_beats, &self.music_beats]
            .into_iter()
            .flatten()
        {
            unit("beat precision", b.precision)?;
            unit("beat recall", b.recall)?;
            unit("beat F-score", b.f_score)?;
        }
        if let Some(f) = self.fid {
            nonneg("FID", f)?;
        }
        for (name, a) in [
            ("A-seq-D", self.a_seq_d),
            ("I-seq-D", self.i_seq_d),
            ("S-music-D", self.s_music_d),
        ] {
            if let Some(a) = a {
                nonneg(name, a.value)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Two-column plain-text table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("generated sequences".into(), self.generated.to_string()),
            ("reference sequences".into(), self.reference.to_string()),
            ("authenticity".into(), format!("{:.4}", self.authenticity)),
            ("coherence".into(), format!("{:.4}", self.coherence)),
        ];
        for (label, b) in [
            ("motion-beat", &self.motion_beats),
            ("music-beat", &self.music_beats),
        ] {
            match b {
                Some(b) => {
                    rows.push((format!("{label} precision"), format!("{:.4}", b.precision)));
                    rows.push((format!("{label} recall"), format!("{:.4}", b.recall)));
                    rows.push((format!("{label} F-score"), format!("{:.4}", b.f_score)));
                    rows.push((format!("{label} pairs"), b.pairs.to_string()));
                }
                None => rows.push((format!("{label} scores"), "n/a".into())),
            }
        }
        rows.push((
            "FID".into(),
            self.fid.map_or("n/a".into(), |f| format!("{f:.4}")),
        ));
        for (name, a) in [
            ("A-seq-D", self.a_seq_d),
            ("I-seq-D", self.i_seq_d),
            ("S-music-D", self.s_music_d),
        ] {
            let v = match a {
                Some(a) if a.defined => format!("{:.4}", a.value),
                Some(a) => format!("{:.4} (undefined)", a.value),
                None => "n/a".into(),
            };
            rows.push((name.into(), v));
        }
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
