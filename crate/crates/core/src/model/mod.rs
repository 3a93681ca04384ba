//! Kinematic-tree rigid-body model: forward kinematics, mass matrix, bias
//! forces, frame Jacobians and their derivatives, capsule proximity.

mod capsule;
mod description;
mod robot;

pub use capsule::{closest_segment_params, WitnessPair};
pub use description::{BodyDesc, CapsuleDesc, JointType, ModelDescription, ModelError, WORLD};
pub use robot::{build_model, Body, Capsule, DynamicsTerms, Joint, Kinematics, RobotModel, RobotState};
