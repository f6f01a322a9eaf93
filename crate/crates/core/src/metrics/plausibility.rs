use serde::{Deserialize, Serialize};

use super::kinematics::{joint_angles, JointAngles};
use crate::error::{Error, Result};
use crate::motion::skeleton::INTERIOR_JOINTS;
use crate::motion::PoseSequence;

/// Range of one interior joint angle and its angular-speed cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimit {
    pub name: String,
    pub min_deg: f64,
    pub max_deg: f64,
    /// Radians per second.
    pub max_speed: f64,
}

/// Anatomical limits for every interior joint.
///
/// The defaults are conservative hand-picked ranges for interior (not
/// flexion) angles, where 180° is a straight limb; they are user-editable
/// configuration, not measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimitTable {
    pub joints: Vec<JointLimit>,
}

const SPEED_CAP: f64 = 4.0 * std::f64::consts::PI;

impl Default for JointLimitTable {
    fn default() -> Self {
        let lim = |name: &str, min_deg: f64| JointLimit {
            name: name.to_string(),
            min_deg,
            max_deg: 180.0,
            max_speed: SPEED_CAP,
        };
        Self {
            joints: vec![
                lim("right_hip", 40.0),
                lim("right_knee", 5.0),
                lim("left_hip", 40.0),
                lim("left_knee", 5.0),
                lim("spine", 60.0),
                lim("neck", 90.0),
                lim("left_shoulder", 15.0),
                lim("left_elbow", 30.0),
                lim("right_shoulder", 15.0),
                lim("right_elbow", 30.0),
            ],
        }
    }
}

impl JointLimitTable {
    /// Limits ordered like the interior-joint list.
    pub fn ordered(&self) -> Result<Vec<&JointLimit>> {
        INTERIOR_JOINTS
            .iter()
            .map(|j| {
                let l = self
                    .joints
                    .iter()
                    .find(|l| l.name == j.name)
                    .ok_or_else(|| {
                        Error::invalid(format!("joint limit table has no entry for {}", j.name))
                    })?;
                if !(l.min_deg < l.max_deg) {
                    return Err(Error::invalid(format!(
                        "{}: min {}° is not below max {}°",
                        l.name, l.min_deg, l.max_deg
                    )));
                }
                if !(l.max_speed > 0.0) {
                    return Err(Error::invalid(format!(
                        "{}: speed cap must be positive",
                        l.name
                    )));
                }
                Ok(l)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.ordered().map(|_| ())
    }
}

/// Angle tolerance in degrees for range checks, absorbing rounding at the
/// 180° boundary.
const DEG_TOL: f64 = 1e-9;

/// Per-frame validity under the angle ranges.
pub fn frames_within_limits(angles: &JointAngles, limits: &JointLimitTable) -> Result<Vec<bool>> {
    let ordered = limits.ordered()?;
    Ok((0..angles.len())
        .map(|t| {
            angles.defined[t]
                && angles.frame(t).iter().zip(&ordered).all(|(&a, l)| {
                    let deg = a.to_degrees();
                    deg >= l.min_deg - DEG_TOL && deg <= l.max_deg + DEG_TOL
                })
        })
        .collect())
}

/// Fraction of frames where every interior joint is within its range.
pub fn authenticity(seq: &PoseSequence, limits: &JointLimitTable) -> Result<f64> {
    let valid = frames_within_limits(&joint_angles(seq), limits)?;
    Ok(valid.iter().filter(|&&v| v).count() as f64 / valid.len() as f64)
}

/// Per-transition validity under the speed caps (`T - 1` entries).
pub fn transitions_within_caps(
    angles: &JointAngles,
    limits: &JointLimitTable,
) -> Result<Vec<bool>> {
    let ordered = limits.ordered()?;
    Ok((1..angles.len())
        .map(|t| {
            angles.defined[t]
                && angles.defined[t - 1]
                && angles
                    .frame(t)
                    .iter()
                    .zip(angles.frame(t - 1))
                    .zip(&ordered)
                    .all(|((a, b), l)| (a - b).abs() * angles.fps <= l.max_speed)
        })
        .collect())
}

/// Fraction of the `T - 1` frame transitions where every joint's angular
/// speed stays under its cap.
pub fn coherence(seq: &PoseSequence, limits: &JointLimitTable) -> Result<f64> {
    if seq.len() < 2 {
        return Err(Error::invalid("coherence needs at least two frames"));
    }
    let valid = transitions_within_caps(&joint_angles(seq), limits)?;
    Ok(valid.iter().filter(|&&v| v).count() as f64 / valid.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::skeleton::neutral_pose;

    #[test]
    fn neutral_is_valid() {
        let seq = PoseSequence::from_joint_frames(24.0, &vec![neutral_pose(); 100]).unwrap();
        let lim = JointLimitTable::default();
        assert_eq!(authenticity(&seq, &lim).unwrap(), 1.0);
        assert_eq!(coherence(&seq, &lim).unwrap(), 1.0);
    }

    #[test]
    fn missing_joint_rejected() {
        let mut lim = JointLimitTable::default();
        lim.joints.pop();
        assert!(lim
            .validate()
            .unwrap_err()
            .to_string()
            .contains("right_elbow"));
    }

    #[test]
    fn collapsed_frame_is_invalid() {
        let mut frames = vec![neutral_pose(); 4];
        frames[2] = [[0.0; 3]; 17];
        let seq = PoseSequence::from_joint_frames(24.0, &frames).unwrap();
        assert_eq!(
            authenticity(&seq, &JointLimitTable::default()).unwrap(),
            0.75
        );
    }
}
