//! Penalty-contact physics world: semi-implicit Euler on the full rigid-body
//! dynamics with spring-damper ground contact at the foot points and anchored
//! tangential friction.

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::config::SimConfig;
use crate::linalg::DVec;
use crate::locomotion::Side;
use crate::model::{Kinematics, RobotModel, RobotState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite state at t = {0:.4} s")]
    NonFiniteState(f64),
    #[error("torque vector has {got} entries, expected {expected}")]
    TorqueDim { got: usize, expected: usize },
}

/// Ground contact bookkeeping for one foot.
#[derive(Debug, Clone, Default)]
struct FootContact {
    /// Tangential spring anchor while the foot sticks.
    anchor: Option<Vector2<f64>>,
}

#[derive(Debug, Clone)]
pub struct SimWorld {
    pub model: RobotModel,
    pub state: RobotState,
    pub time: f64,
    pub cfg: SimConfig,
    foot_body: [usize; 2],
    foot_offset: Vector3<f64>,
    contacts: [FootContact; 2],
    /// Ground reaction force applied to each foot during the last step.
    pub last_contact_force: [Vector3<f64>; 2],
}

impl SimWorld {
    pub fn new(model: RobotModel, state: RobotState, cfg: SimConfig) -> Result<SimWorld, crate::model::ModelError> {
        model.check_state(&state)?;
        let foot_body = [
            model.body_index("left_shank")?,
            model.body_index("right_shank")?,
        ];
        Ok(SimWorld {
            model,
            state,
            time: 0.0,
            cfg,
            foot_body,
            foot_offset: crate::biped::foot_offset(),
            contacts: [FootContact::default(), FootContact::default()],
            last_contact_force: [Vector3::zeros(); 2],
        })
    }

    pub fn foot_position(&self, kin: &Kinematics, side: Side) -> Vector3<f64> {
        kin.point_position(self.foot_body[side.index()], &self.foot_offset)
    }

    /// Penalty force for one foot: normal spring-damper (non-negative normal)
    /// plus anchored tangential friction clamped to the cone.
    fn contact_force(&mut self, kin: &Kinematics, side: Side) -> Vector3<f64> {
        let idx = side.index();
        let p = kin.point_position(self.foot_body[idx], &self.foot_offset);
        let v = kin.point_velocity(self.foot_body[idx], &self.foot_offset);
        if p.z >= 0.0 {
            self.contacts[idx].anchor = None;
            return Vector3::zeros();
        }
        let pen = -p.z;
        let fn_ = (self.cfg.contact_stiffness * pen - self.cfg.contact_damping * v.z).max(0.0);

        let xy = Vector2::new(p.x, p.y);
        let anchor = *self.contacts[idx].anchor.get_or_insert(xy);
        let mut ft = -self.cfg.tangential_stiffness * (xy - anchor)
            - self.cfg.tangential_damping * Vector2::new(v.x, v.y);
        let cap = self.cfg.friction_mu * fn_;
        if ft.norm() > cap {
            ft *= cap / ft.norm();
            // Slipping: drag the anchor so the spring holds the clamped force.
            let new_anchor = xy + (ft + self.cfg.tangential_damping * Vector2::new(v.x, v.y))
                / self.cfg.tangential_stiffness;
            self.contacts[idx].anchor = Some(new_anchor);
        }
        Vector3::new(ft.x, ft.y, fn_)
    }

    /// Advance one step under joint torques and an external force applied at
    /// the base origin.
    pub fn step(&mut self, tau: &DVec, external_base_force: &Vector3<f64>) -> Result<(), SimError> {
        let n_act = self.model.actuated_dofs().len();
        if tau.len() != n_act {
            return Err(SimError::TorqueDim {
                got: tau.len(),
                expected: n_act,
            });
        }
        let kin = Kinematics::compute(&self.model, &self.state);
        let dynamics = self.model.dynamics_terms(&kin, &self.state);

        let mut generalized = dynamics.s_a.transpose() * tau - &dynamics.bias;
        for side in [Side::Left, Side::Right] {
            let f = self.contact_force(&kin, side);
            self.last_contact_force[side.index()] = f;
            if f != Vector3::zeros() {
                let j = self
                    .model
                    .point_jacobian(&kin, self.foot_body[side.index()], &self.foot_offset);
                generalized += j.transpose() * DVec::from_column_slice(f.as_slice());
            }
        }
        if *external_base_force != Vector3::zeros() {
            let j = self.model.point_jacobian(&kin, 0, &Vector3::zeros());
            generalized += j.transpose() * DVec::from_column_slice(external_base_force.as_slice());
        }

        let qdd = dynamics
            .a
            .clone()
            .cholesky()
            .ok_or(SimError::NonFiniteState(self.time))?
            .solve(&generalized);

        let dt = self.cfg.dt;
        self.state.qd += qdd * dt;
        self.state = self.state.integrated(&self.model, dt);
        self.time += dt;

        if self.state.q.iter().any(|v| !v.is_finite())
            || self.state.qd.iter().any(|v| !v.is_finite())
        {
            return Err(SimError::NonFiniteState(self.time));
        }
        Ok(())
    }

    /// Total mechanical energy (kinetic plus gravitational).
    pub fn energy(&self) -> f64 {
        let kin = Kinematics::compute(&self.model, &self.state);
        self.model.kinetic_energy(&kin) + self.model.potential_energy(&kin)
    }
}
