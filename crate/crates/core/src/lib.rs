//! Whole-body control for a point-foot biped built on Riemannian motion
//! policies fused with dynamically consistent null-space task prioritization,
//! plus a physics simulation and push-recovery benchmark harness.

pub mod biped;
pub mod config;
pub mod controller;
pub mod linalg;
pub mod locomotion;
pub mod model;
pub mod qp;
pub mod rmp;
pub mod sim;
pub mod wbc;
