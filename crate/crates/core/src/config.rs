//! Structured-text (TOML) configuration: robot model, controller gains, gait
//! timing, and simulation parameters in one file, with validated defaults
//! matching the built-in biped.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biped;
use crate::locomotion::{GaitConfig, SrbParams, StepRegion, TvrParams};
use crate::model::ModelDescription;
use crate::rmp::CollisionRmpParams;
use crate::wbc::ApfParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    /// TOML parse failures carry the line/column span from the parser.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: [f64; 3],
    pub kd: [f64; 3],
}

/// Which avoidance back-end the swing-leg controller runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvoidanceMode {
    CollisionRmp,
    Apf,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Priority order below the contact level.
    pub task_stack: Vec<String>,
    pub body_orientation: PdGains,
    pub body_position: PdGains,
    pub swing_attractor: PdGains,
    /// Reaction-force relaxation weight (diagonal).
    pub qp_q1: f64,
    /// Floating-base relaxation weight (diagonal).
    pub qp_q2: f64,
    pub friction_mu: f64,
    /// Per-joint torque limits for one leg (roll, pitch, knee), N·m.
    pub torque_limit: [f64; 3],
    /// Cap on a single foot's commanded normal force, N.
    pub fz_max: f64,
    pub avoidance: AvoidanceMode,
    pub collision_rmp: CollisionRmpParams,
    pub apf: ApfParams,
    pub tvr: TvrParams,
    pub step_region: StepRegion,
    /// Swing apex height, m.
    pub swing_apex: f64,
    /// Reaction-force replanning interval, s.
    pub mpc_interval: f64,
    pub srb: SrbParams,
    /// Base height reference, m.
    pub base_height: f64,
    /// Time constant of the horizontal base-reference filter, s.
    pub base_ref_tau: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            task_stack: vec!["body_orientation".into(), "body_position".into()],
            body_orientation: PdGains {
                kp: [220.0, 220.0, 80.0],
                kd: [18.0, 18.0, 10.0],
            },
            body_position: PdGains {
                kp: [24.0, 24.0, 320.0],
                kd: [9.0, 9.0, 30.0],
            },
            swing_attractor: PdGains {
                kp: [620.0, 620.0, 620.0],
                kd: [42.0, 42.0, 42.0],
            },
            qp_q1: 1.0,
            qp_q2: 1e3,
            friction_mu: 0.7,
            torque_limit: [9.0, 18.0, 27.0],
            fz_max: 140.0,
            avoidance: AvoidanceMode::CollisionRmp,
            collision_rmp: CollisionRmpParams::default(),
            apf: ApfParams::default(),
            tvr: TvrParams::default(),
            step_region: StepRegion::default(),
            swing_apex: 0.05,
            mpc_interval: 0.030,
            srb: SrbParams::default(),
            base_height: biped::BASE_HEIGHT,
            base_ref_tau: 0.25,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for name in &self.task_stack {
            if name != "body_orientation" && name != "body_position" {
                return Err(ConfigError::Invalid(format!("unknown task `{name}`")));
            }
        }
        if !(self.friction_mu > 0.0) {
            return Err(ConfigError::Invalid("friction_mu must be > 0".into()));
        }
        if !(self.qp_q1 > 0.0 && self.qp_q2 > 0.0) {
            return Err(ConfigError::Invalid("QP weights must be > 0".into()));
        }
        if !(self.mpc_interval > 0.0) {
            return Err(ConfigError::Invalid("mpc_interval must be > 0".into()));
        }
        self.collision_rmp.validate().map_err(ConfigError::Invalid)?;
        self.tvr.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Physics and control step, s.
    pub dt: f64,
    /// Ground normal stiffness, N/m.
    pub contact_stiffness: f64,
    /// Ground normal damping, N·s/m.
    pub contact_damping: f64,
    /// Tangential anchor stiffness, N/m.
    pub tangential_stiffness: f64,
    /// Tangential damping, N·s/m.
    pub tangential_damping: f64,
    pub friction_mu: f64,
    /// Stepping time before the disturbance window, s.
    pub warmup: f64,
    /// Std-dev of the seeded initial joint-angle jitter, rad.
    pub jitter_std: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            contact_stiffness: 1e4,
            contact_damping: 200.0,
            tangential_stiffness: 8e3,
            tangential_damping: 80.0,
            friction_mu: 0.7,
            warmup: 1.8,
            jitter_std: 2e-3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt <= 1e-3 + 1e-12) {
            return Err(ConfigError::Invalid(format!(
                "sim dt must be in (0, 1e-3], got {}",
                self.dt
            )));
        }
        if !(self.contact_stiffness > 0.0 && self.contact_damping > 0.0) {
            return Err(ConfigError::Invalid(
                "contact stiffness and damping must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Everything one trial needs: robot, controller, gait, world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullConfig {
    pub model: ModelDescription,
    pub controller: ControllerConfig,
    pub gait: GaitConfig,
    pub sim: SimConfig,
}

impl Default for FullConfig {
    fn default() -> Self {
        FullConfig {
            model: biped::description(),
            controller: ControllerConfig::default(),
            gait: GaitConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

impl FullConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.controller.validate()?;
        self.gait.validate().map_err(ConfigError::Invalid)?;
        self.sim.validate()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FullConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: FullConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| ConfigError::Invalid(format!("serialize: {e}")))?;
        std::fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
