//! The 17-joint skeleton (Human3.6M ordering).

pub const NUM_JOINTS: usize = 17;
/// Coordinates per frame: 17 joints × xyz.
pub const POSE_DIMS: usize = NUM_JOINTS * 3;

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "spine",
    "thorax",
    "neck",
    "head",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
];

pub const PELVIS: usize = 0;

/// Parent of each joint in the kinematic tree; the pelvis is the root.
pub const PARENTS: [Option<usize>; NUM_JOINTS] = [
    None,
    Some(0),
    Some(1),
    Some(2),
    Some(0),
    Some(4),
    Some(5),
    Some(0),
    Some(7),
    Some(8),
    Some(9),
    Some(8),
    Some(11),
    Some(12),
    Some(8),
    Some(14),
    Some(15),
];

/// Bones as (parent, child) pairs.
pub fn bones() -> impl Iterator<Item = (usize, usize)> {
    PARENTS
        .iter()
        .enumerate()
        .filter_map(|(c, p)| p.map(|p| (p, c)))
}

/// An interior joint and its two neighbours along incident bones. The joint
/// angle is the angle at `joint` between `joint→a` and `joint→b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteriorJoint {
    pub name: &'static str,
    pub a: usize,
    pub joint: usize,
    pub b: usize,
}

pub const INTERIOR_JOINTS: [InteriorJoint; 10] = [
    InteriorJoint {
        name: "right_hip",
        a: 0,
        joint: 1,
        b: 2,
    },
    InteriorJoint {
        name: "right_knee",
        a: 1,
        joint: 2,
        b: 3,
    },
    InteriorJoint {
        name: "left_hip",
        a: 0,
        joint: 4,
        b: 5,
    },
    InteriorJoint {
        name: "left_knee",
        a: 4,
        joint: 5,
        b: 6,
    },
    InteriorJoint {
        name: "spine",
        a: 0,
        joint: 7,
        b: 8,
    },
    InteriorJoint {
        name: "neck",
        a: 8,
        joint: 9,
        b: 10,
    },
    InteriorJoint {
        name: "left_shoulder",
        a: 8,
        joint: 11,
        b: 12,
    },
    InteriorJoint {
        name: "left_elbow",
        a: 11,
        joint: 12,
        b: 13,
    },
    InteriorJoint {
        name: "right_shoulder",
        a: 8,
        joint: 14,
        b: 15,
    },
    InteriorJoint {
        name: "right_elbow",
        a: 14,
        joint: 15,
        b: 16,
    },
];

pub fn joint_names() -> Vec<String> {
    JOINT_NAMES.iter().map(|s| s.to_string()).collect()
}

/// A neutral standing pose, in meters, y up, facing +z.
pub fn neutral_pose() -> [[f64; 3]; NUM_JOINTS] {
    [
        [0.0, 0.0, 0.0],
        [-0.13, 0.0, 0.0],
        [-0.13, -0.44, 0.02],
        [-0.13, -0.86, 0.0],
        [0.13, 0.0, 0.0],
        [0.13, -0.44, 0.02],
        [0.13, -0.86, 0.0],
        [0.0, 0.23, 0.0],
        [0.0, 0.48, 0.0],
        [0.0, 0.58, 0.02],
        [0.0, 0.70, 0.0],
        [0.17, 0.45, 0.0],
        [0.22, 0.18, 0.03],
        [0.25, -0.06, 0.08],
        [-0.17, 0.45, 0.0],
        [-0.22, 0.18, 0.03],
        [-0.25, -0.06, 0.08],
    ]
}
