//! Evaluation of generated motion: kinematic plausibility, beat alignment,
//! and feature-distribution distances computed with a style classifier.

pub mod beats;
pub mod classifier;
pub mod diversity;
pub mod fid;
pub mod kinematics;
pub mod plausibility;
mod report;

pub use beats::{beat_scores, extract_motion_beats, BeatScores, BeatSequence};
pub use classifier::{
    train_style_classifier, ClassifierConfig, ClassifierTraining, StyleClassifier,
};
pub use diversity::{a_seq_d, i_seq_d, s_music_d, Aggregate, DiversityConfig};
pub use fid::{fid, fid_from_moments};
pub use kinematics::{joint_angles, JointAngles};
pub use plausibility::{authenticity, coherence, JointLimit, JointLimitTable};
pub use report::{
    evaluate, BeatSummary, EvaluationOptions, MetricReport, NamedSequence, METRIC_REPORT_SCHEMA,
};
