//! Default description of the small point-foot biped: a 5.4 kg torso-plus-two-
//! legs tree with 6 actuated joints (hip roll, hip pitch, knee per leg) and a
//! collision capsule on each shank.
//!
//! Frames: x forward, y left, z up. The base frame sits at hip height; at the
//! nominal crouch the base is 0.45 m above the ground and each foot is
//! directly below its hip.

use nalgebra::Vector3;

use crate::model::{BodyDesc, CapsuleDesc, JointType, ModelDescription, WORLD};

pub const TORSO_MASS: f64 = 3.2;
pub const HIP_MASS: f64 = 0.35;
pub const THIGH_MASS: f64 = 0.45;
pub const SHANK_MASS: f64 = 0.30;
pub const THIGH_LEN: f64 = 0.25;
pub const SHANK_LEN: f64 = 0.25;
/// Lateral offset base → hip roll axis.
pub const HIP_OFFSET_Y: f64 = 0.05;
/// Lateral offset hip → thigh plane.
pub const THIGH_OFFSET_Y: f64 = 0.02;
/// Nominal base height above ground.
pub const BASE_HEIGHT: f64 = 0.45;
pub const SHANK_CAPSULE_RADIUS: f64 = 0.015;

/// Half the nominal distance between the feet.
pub const STANCE_HALF_WIDTH: f64 = HIP_OFFSET_Y + THIGH_OFFSET_Y;

fn diag(x: f64, y: f64, z: f64) -> [[f64; 3]; 3] {
    [[x, 0.0, 0.0], [0.0, y, 0.0], [0.0, 0.0, z]]
}

fn leg(side: &str, sign: f64) -> Vec<BodyDesc> {
    let hip = BodyDesc {
        name: format!("{side}_hip"),
        parent: "base".into(),
        joint_type: JointType::Revolute,
        joint_axis: [1.0, 0.0, 0.0], // abduction / hip roll
        translation: [0.0, sign * HIP_OFFSET_Y, 0.0],
        rpy: [0.0; 3],
        mass: HIP_MASS,
        com_offset: [0.0, sign * 0.01, 0.0],
        rotational_inertia: diag(4e-4, 4e-4, 4e-4),
    };
    let thigh_i = THIGH_MASS * THIGH_LEN * THIGH_LEN / 12.0;
    let thigh = BodyDesc {
        name: format!("{side}_thigh"),
        parent: format!("{side}_hip"),
        joint_type: JointType::Revolute,
        joint_axis: [0.0, 1.0, 0.0], // flexion / hip pitch
        translation: [0.0, sign * THIGH_OFFSET_Y, 0.0],
        rpy: [0.0; 3],
        mass: THIGH_MASS,
        com_offset: [0.0, 0.0, -THIGH_LEN / 2.0],
        rotational_inertia: diag(thigh_i, thigh_i, 2e-5),
    };
    let shank_i = SHANK_MASS * SHANK_LEN * SHANK_LEN / 12.0;
    let shank = BodyDesc {
        name: format!("{side}_shank"),
        parent: format!("{side}_thigh"),
        joint_type: JointType::Revolute,
        joint_axis: [0.0, 1.0, 0.0], // knee pitch
        translation: [0.0, 0.0, -THIGH_LEN],
        rpy: [0.0; 3],
        mass: SHANK_MASS,
        com_offset: [0.0, 0.0, -SHANK_LEN * 0.45],
        rotational_inertia: diag(shank_i, shank_i, 1.5e-5),
    };
    vec![hip, thigh, shank]
}

/// Torso CoM x-offset that puts the total CoM directly above the feet at the
/// nominal crouch (the bent legs pull the CoM backward otherwise).
fn torso_com_x() -> f64 {
    let cos_t = BASE_HEIGHT / (THIGH_LEN + SHANK_LEN);
    let sin_t = (1.0 - cos_t * cos_t).sqrt();
    let thigh_x = -(THIGH_LEN / 2.0) * sin_t;
    let shank_x = -THIGH_LEN * sin_t + SHANK_LEN * 0.45 * sin_t;
    -2.0 * (THIGH_MASS * thigh_x + SHANK_MASS * shank_x) / TORSO_MASS
}

pub fn description() -> ModelDescription {
    let mut bodies = vec![BodyDesc {
        name: "base".into(),
        parent: WORLD.into(),
        joint_type: JointType::Floating,
        joint_axis: [0.0, 0.0, 1.0],
        translation: [0.0; 3],
        rpy: [0.0; 3],
        mass: TORSO_MASS,
        com_offset: [torso_com_x(), 0.0, 0.10],
        rotational_inertia: diag(0.030, 0.033, 0.009),
    }];
    bodies.extend(leg("left", 1.0));
    bodies.extend(leg("right", -1.0));

    let capsules = ["left_shank", "right_shank"]
        .iter()
        .map(|body| CapsuleDesc {
            body: (*body).into(),
            endpoint_a: [0.0, 0.0, 0.0],
            endpoint_b: [0.0, 0.0, -SHANK_LEN],
            radius: SHANK_CAPSULE_RADIUS,
        })
        .collect();

    ModelDescription {
        bodies,
        capsules,
        actuated_joint_names: vec![
            "left_hip".into(),
            "left_thigh".into(),
            "left_shank".into(),
            "right_hip".into(),
            "right_thigh".into(),
            "right_shank".into(),
        ],
        gravity: [0.0, 0.0, -9.81],
    }
}

/// Foot contact point: tip of the shank, in the shank frame.
pub fn foot_offset() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, -SHANK_LEN)
}

/// Hip pitch / knee angles that put the base at `BASE_HEIGHT` with feet
/// directly below the hips: symmetric crouch, thigh pitched forward by θ and
/// shank back by the same amount.
pub fn nominal_leg_angles() -> (f64, f64) {
    let cos_theta = BASE_HEIGHT / (THIGH_LEN + SHANK_LEN);
    let theta = cos_theta.acos();
    (theta, -2.0 * theta)
}

/// Nominal standing state: base at `BASE_HEIGHT`, symmetric crouch, zero
/// velocity.
pub fn nominal_state(model: &crate::model::RobotModel) -> crate::model::RobotState {
    let mut state = model.neutral_state();
    state.q[2] = BASE_HEIGHT;
    let (hip_pitch, knee) = nominal_leg_angles();
    for side in ["left", "right"] {
        let thigh = model.body_index(&format!("{side}_thigh")).unwrap();
        let shank = model.body_index(&format!("{side}_shank")).unwrap();
        state.q[model.bodies()[thigh].q_offset] = hip_pitch;
        state.q[model.bodies()[shank].q_offset] = knee;
    }
    state
}
