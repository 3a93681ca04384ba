//! Prioritized task execution: dynamically consistent null-space projection,
//! the modified RMP pullback, the relaxation QP, and torque extraction.

mod apf;
mod integration;
mod projection;
mod reaction;

pub use apf::{apf_baseline_accel, ApfParams};
pub use integration::{final_accel, modified_pullback};
pub use projection::{
    contact_accel, dyn_pinv, dyn_pinv_with_inv, operational_inertia, project_tasks,
    ContactConstraint, LevelReport, PriorityStack, ProjectedStack, TaskLevel,
};
pub use reaction::{solve_wbc_qp, ContactBound, WbcQpError, WbcQpProblem, WbcSolution};
