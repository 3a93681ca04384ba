//! Push-recovery trial execution: seeded warm-up stepping, a timed transverse
//! disturbance on the base, and a three-second failure-monitoring window.

use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::world::SimWorld;
use crate::config::FullConfig;
use crate::controller::Controller;
use crate::locomotion::TimingTag;
use crate::model::{build_model, Kinematics};

/// Base height below which the robot is considered fallen, m.
pub const BASE_HEIGHT_FLOOR: f64 = 0.25;
/// Failure observation window after the disturbance, s.
pub const FAILURE_WINDOW: f64 = 3.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    /// N, within [10, 100].
    pub magnitude: f64,
    /// Direction in the transverse plane, rad (0 = +x, π/2 = +y).
    pub angle: f64,
    pub timing: TimingTag,
    /// s; the protocol default is 20 ms.
    pub duration: f64,
}

impl DisturbanceSpec {
    pub fn new(magnitude: f64, angle: f64, timing: TimingTag) -> DisturbanceSpec {
        DisturbanceSpec {
            magnitude,
            angle,
            timing,
            duration: 0.020,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(10.0..=100.0).contains(&self.magnitude) {
            return Err(format!(
                "disturbance magnitude {} N outside [10, 100]",
                self.magnitude
            ));
        }
        if !(self.duration > 0.0) {
            return Err("disturbance duration must be > 0".into());
        }
        Ok(())
    }

    /// Transverse-plane force vector.
    pub fn force(&self) -> Vector3<f64> {
        Vector3::new(
            self.magnitude * self.angle.cos(),
            self.magnitude * self.angle.sin(),
            0.0,
        )
    }
}

/// Force active during [t_start, t_start + duration), zero otherwise.
pub fn apply_disturbance(spec: &DisturbanceSpec, t_start: f64, t: f64) -> Vector3<f64> {
    if t >= t_start && t < t_start + spec.duration {
        spec.force()
    } else {
        Vector3::zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    None,
    BaseTooLow,
    SelfCollision,
    /// Repeated QP failures or a non-finite simulation state.
    ControllerFault,
}

impl FailureCause {
    pub fn name(&self) -> &'static str {
        match self {
            FailureCause::None => "none",
            FailureCause::BaseTooLow => "base_too_low",
            FailureCause::SelfCollision => "self_collision",
            FailureCause::ControllerFault => "controller_fault",
        }
    }
    pub fn parse(s: &str) -> Option<FailureCause> {
        match s {
            "none" => Some(FailureCause::None),
            "base_too_low" => Some(FailureCause::BaseTooLow),
            "self_collision" => Some(FailureCause::SelfCollision),
            "controller_fault" => Some(FailureCause::ControllerFault),
            _ => None,
        }
    }
}

/// Instantaneous failure classification.
pub fn detect_failure(base_height: f64, limb_clearance: f64) -> FailureCause {
    if base_height < BASE_HEIGHT_FLOOR {
        FailureCause::BaseTooLow
    } else if limb_clearance < 0.0 {
        FailureCause::SelfCollision
    } else {
        FailureCause::None
    }
}

/// Windowed failure accumulator.
#[derive(Debug, Clone)]
pub struct FailureMonitor {
    pub min_base_height: f64,
    pub min_clearance: f64,
    pub cause: FailureCause,
}

impl Default for FailureMonitor {
    fn default() -> Self {
        FailureMonitor {
            min_base_height: f64::INFINITY,
            min_clearance: f64::INFINITY,
            cause: FailureCause::None,
        }
    }
}

impl FailureMonitor {
    pub fn observe(&mut self, base_height: f64, clearance: f64) {
        self.min_base_height = self.min_base_height.min(base_height);
        self.min_clearance = self.min_clearance.min(clearance);
        if self.cause == FailureCause::None {
            self.cause = detect_failure(base_height, clearance);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub failure_cause: FailureCause,
    pub min_base_height: f64,
    pub min_capsule_clearance: f64,
    pub disturbance: DisturbanceSpec,
    pub seed: u64,
}

/// Per-tick record for the optional trajectory dump.
#[derive(Debug, Clone, Serialize)]
pub struct TrialTick {
    pub time: f64,
    pub phase: String,
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub contact_force_left: [f64; 3],
    pub contact_force_right: [f64; 3],
    pub capsule_distance: f64,
    pub base_height: f64,
}

const MAX_CONSECUTIVE_QP_FAULTS: usize = 10;

/// Run one push-recovery trial: seeded warm-up stepping, disturbance at the
/// tagged gait instant, and a 3 s failure window. Deterministic per
/// (config, spec, seed).
pub fn run_trial(config: &FullConfig, spec: &DisturbanceSpec, seed: u64) -> TrialOutcome {
    run_trial_with(config, spec, seed, |_| {})
}

pub fn run_trial_with<F: FnMut(&TrialTick)>(
    config: &FullConfig,
    spec: &DisturbanceSpec,
    seed: u64,
    mut sink: F,
) -> TrialOutcome {
    let fail = |cause: FailureCause, monitor: &FailureMonitor| TrialOutcome {
        success: false,
        failure_cause: cause,
        min_base_height: monitor.min_base_height,
        min_capsule_clearance: monitor.min_clearance,
        disturbance: *spec,
        seed,
    };

    let model = match build_model(&config.model) {
        Ok(m) => m,
        Err(_) => return fail(FailureCause::ControllerFault, &FailureMonitor::default()),
    };
    let mut state = crate::biped::nominal_state(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if config.sim.jitter_std > 0.0 {
        for b in model.bodies() {
            if matches!(b.joint, crate::model::Joint::Revolute(_)) {
                let n: f64 = rng.sample(rand_distr::StandardNormal);
                state.q[b.q_offset] += config.sim.jitter_std * n;
            }
        }
    }

    let mut world = match SimWorld::new(model.clone(), state, config.sim.clone()) {
        Ok(w) => w,
        Err(_) => return fail(FailureCause::ControllerFault, &FailureMonitor::default()),
    };
    let mut controller = match Controller::new(
        model,
        config.controller.clone(),
        config.gait.clone(),
        config.sim.dt,
    ) {
        Ok(c) => c,
        Err(_) => return fail(FailureCause::ControllerFault, &FailureMonitor::default()),
    };

    // First tag occurrence at or after the warm-up time.
    let cycle = config.gait.cycle;
    let tag = config.gait.tag_time(spec.timing);
    let mut t_dist = tag;
    while t_dist < config.sim.warmup {
        t_dist += cycle;
    }
    let t_end = t_dist + spec.duration + FAILURE_WINDOW;

    let left_cap = world.model.capsule_on("left_shank").expect("capsule");
    let right_cap = world.model.capsule_on("right_shank").expect("capsule");

    let mut monitor = FailureMonitor::default();
    let mut qp_fault_streak = 0usize;

    while world.time < t_end {
        let t = world.time;
        let out = controller.step(&world.state);
        if out.fault.is_some() {
            qp_fault_streak += 1;
            if qp_fault_streak > MAX_CONSECUTIVE_QP_FAULTS {
                return fail(FailureCause::ControllerFault, &monitor);
            }
        } else {
            qp_fault_streak = 0;
        }

        let force = apply_disturbance(spec, t_dist, t);
        if world.step(&out.tau, &force).is_err() {
            return fail(FailureCause::ControllerFault, &monitor);
        }

        let kin = Kinematics::compute(&world.model, &world.state);
        let clearance = world
            .model
            .capsule_witness(&kin, left_cap, right_cap)
            .distance;
        let base_z = world.state.q[2];

        sink(&TrialTick {
            time: world.time,
            phase: out.debug.phase.clone(),
            q: world.state.q.iter().copied().collect(),
            qd: world.state.qd.iter().copied().collect(),
            contact_force_left: world.last_contact_force[0].into(),
            contact_force_right: world.last_contact_force[1].into(),
            capsule_distance: clearance,
            base_height: base_z,
        });

        // The failure window covers the disturbance and the subsequent 3 s;
        // falling during warm-up also ends the trial as a failure.
        if world.time >= t_dist {
            monitor.observe(base_z, clearance);
            if monitor.cause != FailureCause::None {
                break;
            }
        } else if detect_failure(base_z, clearance) != FailureCause::None {
            let mut m = monitor.clone();
            m.observe(base_z, clearance);
            return TrialOutcome {
                success: false,
                failure_cause: m.cause,
                min_base_height: m.min_base_height,
                min_capsule_clearance: m.min_clearance,
                disturbance: *spec,
                seed,
            };
        }
    }

    TrialOutcome {
        success: monitor.cause == FailureCause::None,
        failure_cause: monitor.cause,
        min_base_height: monitor.min_base_height,
        min_capsule_clearance: monitor.min_clearance,
        disturbance: *spec,
        seed,
    }
}

/// Unforced stepping endurance: number of completed swing phases before a
/// failure, capped at `max_steps`.
pub fn count_unassisted_steps(config: &FullConfig, seed: u64, max_steps: usize) -> usize {
    let model = match build_model(&config.model) {
        Ok(m) => m,
        Err(_) => return 0,
    };
    let mut state = crate::biped::nominal_state(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if config.sim.jitter_std > 0.0 {
        for b in model.bodies() {
            if matches!(b.joint, crate::model::Joint::Revolute(_)) {
                let n: f64 = rng.sample(rand_distr::StandardNormal);
                state.q[b.q_offset] += config.sim.jitter_std * n;
            }
        }
    }
    let mut world = match SimWorld::new(model.clone(), state, config.sim.clone()) {
        Ok(w) => w,
        Err(_) => return 0,
    };
    let mut controller =
        match Controller::new(model, config.controller.clone(), config.gait.clone(), config.sim.dt)
        {
            Ok(c) => c,
            Err(_) => return 0,
        };
    let left_cap = world.model.capsule_on("left_shank").expect("capsule");
    let right_cap = world.model.capsule_on("right_shank").expect("capsule");

    let mut steps = 0;
    let mut was_swinging = false;
    while steps < max_steps {
        let out = controller.step(&world.state);
        if world.step(&out.tau, &Vector3::zeros()).is_err() {
            break;
        }
        let kin = Kinematics::compute(&world.model, &world.state);
        let clearance = world
            .model
            .capsule_witness(&kin, left_cap, right_cap)
            .distance;
        if detect_failure(world.state.q[2], clearance) != FailureCause::None {
            break;
        }
        let swinging = controller.gait().status().swing.is_some();
        if was_swinging && !swinging {
            steps += 1;
        }
        was_swinging = swinging;
    }
    steps
}
