use crate::motion::skeleton::{InteriorJoint, INTERIOR_JOINTS};
use crate::motion::PoseSequence;

/// Bones shorter than this make a joint angle undefined.
pub const MIN_BONE_LENGTH: f64 = 1e-9;

/// Interior joint angles of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAngles {
    /// Row-major `T × 10` angles in radians; NaN where undefined.
    pub angles: Vec<f64>,
    /// False for frames with a zero-length bone.
    pub defined: Vec<bool>,
    pub fps: f64,
}

impl JointAngles {
    pub const JOINTS: usize = INTERIOR_JOINTS.len();

    pub fn len(&self) -> usize {
        self.defined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defined.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.angles[t * Self::JOINTS..(t + 1) * Self::JOINTS]
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Angle at `j.joint` between the bones towards `j.a` and `j.b`, or `None`
/// if either bone has zero length.
pub fn interior_angle(points: impl Fn(usize) -> [f64; 3], j: &InteriorJoint) -> Option<f64> {
    let c = points(j.joint);
    let u = sub(points(j.a), c);
    let v = sub(points(j.b), c);
    let (nu, nv) = (norm(u), norm(v));
    if nu < MIN_BONE_LENGTH || nv < MIN_BONE_LENGTH {
        return None;
    }
    let cos = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (nu * nv);
    Some(cos.clamp(-1.0, 1.0).acos())
}

pub fn joint_angles(seq: &PoseSequence) -> JointAngles {
    let t_len = seq.len();
    let mut angles = Vec::with_capacity(t_len * INTERIOR_JOINTS.len());
    let mut defined = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut ok = true;
        for j in &INTERIOR_JOINTS {
            match interior_angle(|k| seq.joint(t, k), j) {
                Some(a) => angles.push(a),
                None => {
                    ok = false;
                    angles.push(f64::NAN);
                }
            }
        }
        defined.push(ok);
    }
    JointAngles {
        angles,
        defined,
        fps: seq.fps(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(p: [[f64; 3]; 3]) -> impl Fn(usize) -> [f64; 3] {
        move |k| p[k]
    }

    const J: InteriorJoint = InteriorJoint {
        name: "x",
        a: 0,
        joint: 1,
        b: 2,
    };

    #[test]
    fn straight_and_right_angles() {
        let straight =
            interior_angle(pts([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]), &J).unwrap();
        assert_eq!(straight, std::f64::consts::PI);
        let right =
            interior_angle(pts([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), &J).unwrap();
        assert!((right - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(interior_angle(pts([[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]]), &J).is_none());
    }
}
