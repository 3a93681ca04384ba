//! Gait scheduling, foot-step planning, swing trajectories, and reaction-force
//! reference generation.

mod gait;
mod srb;
mod swing;
mod tvr;

pub use gait::{GaitConfig, GaitPhase, GaitSchedule, GaitStatus, Side, SwingInfo, TimingTag};
pub use srb::{
    srb_reaction_forces, static_split, ScheduledContact, SrbParams, SrbPlan, GRAVITY_VEC,
};
pub use swing::{min_jerk, Quintic, SwingTrajectory};
pub use tvr::{lipm_predict, tvr_plan, RegionMode, StepRegion, TvrParams, GRAVITY};
