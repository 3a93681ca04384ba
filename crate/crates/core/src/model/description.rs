//! Declarative robot description: the validated input to the model builder.
//!
//! A description is a kinematic tree of bodies hanging off the world frame.
//! Exactly one body connects to the world through a floating joint; all other
//! world-attached bodies must be fixed. Units are SI, frames right-handed,
//! gravity points along -z.

use nalgebra::{Isometry3, Matrix3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name used for the implicit root of the tree.
pub const WORLD: &str = "world";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointType {
    /// 6-DoF free joint (position + quaternion), only valid at the root.
    Floating,
    /// 1-DoF hinge about `joint_axis` in the body frame.
    Revolute,
    /// Rigid weld, contributes no coordinates.
    Fixed,
}

/// One body plus the joint connecting it to its parent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BodyDesc {
    pub name: String,
    /// Parent body name, or "world".
    pub parent: String,
    pub joint_type: JointType,
    /// Hinge axis in the body frame; ignored for floating/fixed joints.
    #[serde(default = "default_axis")]
    pub joint_axis: [f64; 3],
    /// Body frame origin in the parent frame at q = 0, meters.
    #[serde(default)]
    pub translation: [f64; 3],
    /// Body frame orientation in the parent frame at q = 0, XYZ Euler, radians.
    #[serde(default)]
    pub rpy: [f64; 3],
    /// kg
    pub mass: f64,
    /// Center of mass in the body frame, meters.
    #[serde(default)]
    pub com_offset: [f64; 3],
    /// Rotational inertia about the center of mass, body axes, kg·m².
    /// Row-major 3×3; must be symmetric positive definite.
    pub rotational_inertia: [[f64; 3]; 3],
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// Collision capsule rigidly attached to a body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapsuleDesc {
    pub body: String,
    pub endpoint_a: [f64; 3],
    pub endpoint_b: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDescription {
    pub bodies: Vec<BodyDesc>,
    #[serde(default)]
    pub capsules: Vec<CapsuleDesc>,
    /// Names of bodies whose joints are torque-actuated (revolute only).
    #[serde(default)]
    pub actuated_joint_names: Vec<String>,
    /// m/s², world frame.
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate body name `{0}`")]
    DuplicateBody(String),
    #[error("body `{body}` references unknown parent `{parent}`")]
    UnknownParent { body: String, parent: String },
    #[error("cycle detected through body `{0}`")]
    Cycle(String),
    #[error("joint axis of `{body}` has norm {norm}, expected 1")]
    NonUnitAxis { body: String, norm: f64 },
    #[error("body `{0}` has non-positive mass")]
    NonPositiveMass(String),
    #[error("rotational inertia of `{0}` is not symmetric positive definite")]
    BadInertia(String),
    #[error("expected exactly one floating root, found {0}")]
    FloatingRootCount(usize),
    #[error("floating joint on `{0}` is only valid directly under the world")]
    FloatingNotAtRoot(String),
    #[error("capsule references unknown body `{0}`")]
    CapsuleUnknownBody(String),
    #[error("capsule on `{0}` has non-positive radius")]
    CapsuleRadius(String),
    #[error("actuated joint `{0}` is not a revolute joint in the tree")]
    BadActuatedJoint(String),
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("state dimension mismatch: expected q {expected_q}/qd {expected_qd}, got q {got_q}/qd {got_qd}")]
    StateDim {
        expected_q: usize,
        expected_qd: usize,
        got_q: usize,
        got_qd: usize,
    },
    #[error("quaternion norm deviates from 1 by {0:.3e}")]
    QuaternionNorm(f64),
}

impl BodyDesc {
    pub fn transform_to_parent(&self) -> Isometry3<f64> {
        let t = Translation3::new(self.translation[0], self.translation[1], self.translation[2]);
        let r = UnitQuaternion::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]);
        Isometry3::from_parts(t, r)
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        let m = &self.rotational_inertia;
        Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        )
    }

    pub fn com(&self) -> Vector3<f64> {
        Vector3::new(self.com_offset[0], self.com_offset[1], self.com_offset[2])
    }

    pub fn axis(&self) -> Vector3<f64> {
        Vector3::new(self.joint_axis[0], self.joint_axis[1], self.joint_axis[2])
    }
}

impl ModelDescription {
    /// Check every invariant the builder relies on.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.bodies {
            if b.name == WORLD {
                return Err(ModelError::DuplicateBody(WORLD.into()));
            }
            if !seen.insert(b.name.clone()) {
                return Err(ModelError::DuplicateBody(b.name.clone()));
            }
        }
        for b in &self.bodies {
            if b.parent != WORLD && !seen.contains(&b.parent) {
                return Err(ModelError::UnknownParent {
                    body: b.name.clone(),
                    parent: b.parent.clone(),
                });
            }
            if b.joint_type == JointType::Revolute {
                let norm = b.axis().norm();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(ModelError::NonUnitAxis {
                        body: b.name.clone(),
                        norm,
                    });
                }
            }
            if b.joint_type == JointType::Floating && b.parent != WORLD {
                return Err(ModelError::FloatingNotAtRoot(b.name.clone()));
            }
            if !(b.mass > 0.0) {
                return Err(ModelError::NonPositiveMass(b.name.clone()));
            }
            let inertia = b.inertia_matrix();
            if (inertia - inertia.transpose()).norm() > 1e-12 * (1.0 + inertia.norm()) {
                return Err(ModelError::BadInertia(b.name.clone()));
            }
            if inertia.symmetric_eigen().eigenvalues.min() <= 0.0 {
                return Err(ModelError::BadInertia(b.name.clone()));
            }
        }
        // Walk to the world from every body; a walk longer than the body count
        // means the parent chain loops.
        for b in &self.bodies {
            let mut cur = &b.parent;
            let mut hops = 0;
            while cur != WORLD {
                let Some(p) = self.bodies.iter().find(|x| &x.name == cur) else {
                    break;
                };
                cur = &p.parent;
                hops += 1;
                if hops > self.bodies.len() {
                    return Err(ModelError::Cycle(b.name.clone()));
                }
            }
        }
        let floating = self
            .bodies
            .iter()
            .filter(|b| b.joint_type == JointType::Floating)
            .count();
        if floating != 1 {
            return Err(ModelError::FloatingRootCount(floating));
        }
        for c in &self.capsules {
            if !seen.contains(&c.body) {
                return Err(ModelError::CapsuleUnknownBody(c.body.clone()));
            }
            if !(c.radius > 0.0) {
                return Err(ModelError::CapsuleRadius(c.body.clone()));
            }
        }
        for name in &self.actuated_joint_names {
            let ok = self
                .bodies
                .iter()
                .any(|b| &b.name == name && b.joint_type == JointType::Revolute);
            if !ok {
                return Err(ModelError::BadActuatedJoint(name.clone()));
            }
        }
        Ok(())
    }
}
