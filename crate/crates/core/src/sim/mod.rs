//! Physics simulation, disturbance injection, failure detection, and trial
//! execution.

mod trial;
mod world;

pub use trial::{
    apply_disturbance, count_unassisted_steps, detect_failure, run_trial, run_trial_with,
    DisturbanceSpec, FailureCause, FailureMonitor, TrialOutcome, TrialTick, BASE_HEIGHT_FLOOR,
    FAILURE_WINDOW,
};
pub use world::{SimError, SimWorld};
