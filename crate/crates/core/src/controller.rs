//! Whole-body controller for the biped: drives the gait schedule, plans foot
//! steps and reaction forces, stacks the prioritized tasks, fuses the
//! swing-leg RMPs through the modified pullback, and closes the loop through
//! the relaxation QP.

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::Serialize;

use crate::config::{AvoidanceMode, ControllerConfig};
use crate::linalg::{DMat, DVec};
use crate::locomotion::{
    srb_reaction_forces, static_split, GaitConfig, GaitPhase, GaitSchedule, ScheduledContact, Side,
    SwingTrajectory,
};
use crate::model::{Kinematics, RobotModel, RobotState};
use crate::rmp::{collision_rmp, pullback, NaturalRmp, RmpChild};
use crate::wbc::{
    apf_baseline_accel, final_accel, modified_pullback, operational_inertia, project_tasks,
    solve_wbc_qp, ContactBound, ContactConstraint, PriorityStack, TaskLevel, WbcQpProblem,
};

/// Per-tick diagnostics, streamable as line-delimited JSON.
#[derive(Debug, Clone, Serialize)]
pub struct StepDebug {
    pub time: f64,
    pub phase: String,
    /// Per-level tracking residuals from the projection recursion.
    pub task_residuals: Vec<f64>,
    pub contact_residual: f64,
    /// Eigenvalue range of the projected RMP metric.
    pub rmp_metric_min: f64,
    pub rmp_metric_max: f64,
    pub qp_active_rows: usize,
    pub qp_fallback: bool,
    pub capsule_distance: f64,
    pub base_height: f64,
    pub planned_step: Option<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub tau: DVec,
    /// Set when the QP failed and the previous torque was held.
    pub fault: Option<String>,
    pub debug: StepDebug,
}

struct FootRefs {
    body: [usize; 2],
    offset: Vector3<f64>,
    capsule: [usize; 2],
}

/// Stateful controller; one instance per simulated robot.
pub struct Controller {
    model: RobotModel,
    cfg: ControllerConfig,
    gait: GaitSchedule,
    feet: FootRefs,
    time: f64,
    dt: f64,
    swing: Option<ActiveSwing>,
    plan: Option<PlanState>,
    base_ref_xy: Option<Vector2<f64>>,
    prev_tau: DVec,
    /// Most recent planned foothold, for logging.
    last_step_target: Option<Vector2<f64>>,
}

struct ActiveSwing {
    side: Side,
    traj: SwingTrajectory,
    replanned: bool,
}

struct PlanState {
    made_at: f64,
    plan: crate::locomotion::SrbPlan,
}

impl Controller {
    pub fn new(
        model: RobotModel,
        cfg: ControllerConfig,
        gait_cfg: GaitConfig,
        dt: f64,
    ) -> Result<Controller, crate::model::ModelError> {
        let feet = FootRefs {
            body: [
                model.body_index("left_shank")?,
                model.body_index("right_shank")?,
            ],
            offset: crate::biped::foot_offset(),
            capsule: [
                model.capsule_on("left_shank")?,
                model.capsule_on("right_shank")?,
            ],
        };
        let nv_act = model.actuated_dofs().len();
        Ok(Controller {
            model,
            cfg,
            gait: GaitSchedule::new(gait_cfg),
            feet,
            time: 0.0,
            dt,
            swing: None,
            plan: None,
            base_ref_xy: None,
            prev_tau: DVec::zeros(nv_act),
            last_step_target: None,
        })
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn gait(&self) -> &GaitSchedule {
        &self.gait
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    fn foot_pos(&self, kin: &Kinematics, side: Side) -> Vector3<f64> {
        kin.point_position(self.feet.body[side.index()], &self.feet.offset)
    }

    fn foot_vel(&self, kin: &Kinematics, side: Side) -> Vector3<f64> {
        kin.point_velocity(self.feet.body[side.index()], &self.feet.offset)
    }

    /// Plan (or re-plan) the step target for the active swing foot. The
    /// planner works on the LIPM-predicted touchdown state: planning from the
    /// instantaneous state makes every step lag the accelerating CoM.
    fn plan_step(&self, kin: &Kinematics, side: Side, time_to_touchdown: f64) -> Vector2<f64> {
        let com = self.model.com_position(kin);
        let com_vel = self.model.com_velocity(kin);
        let stance = self.foot_pos(kin, side.other());
        let stance_xy = Vector2::new(stance.x, stance.y);
        let (com_td, vel_td) = crate::locomotion::lipm_predict(
            &com,
            &com_vel,
            &stance_xy,
            self.cfg.tvr.omega(),
            time_to_touchdown.max(0.0),
        );
        let raw = crate::locomotion::tvr_plan(&com_td, &vel_td, side, &self.cfg.tvr);
        self.cfg.step_region.clamp_step(&raw, &stance_xy, side)
    }

    /// Contact schedule over the reaction-force horizon, with planned
    /// footholds substituted for feet that will be in flight.
    fn horizon_schedule(
        &self,
        kin: &Kinematics,
    ) -> (Vec<Vec<ScheduledContact>>, Vec<Vector3<f64>>) {
        let params = &self.cfg.srb;
        let mut schedule = Vec::with_capacity(params.horizon_steps);
        let mut com_ref = Vec::with_capacity(params.horizon_steps);
        let mut future_pos = [
            self.foot_pos(kin, Side::Left),
            self.foot_pos(kin, Side::Right),
        ];
        // A foot currently swinging will land at its planned target.
        if let Some(sw) = &self.swing {
            let t = sw.traj.target;
            future_pos[sw.side.index()] = Vector3::new(t.x, t.y, 0.0);
        }
        for k in 0..params.horizon_steps {
            let clock = self.gait.clock() + (k as f64 + 1.0) * params.dt;
            let status = self.gait.status_at(clock);
            if let Some(info) = status.swing {
                // Once a future swing starts, assume it lands at the current
                // plan's target estimate (refined on the next replan).
                let target = self
                    .last_step_target
                    .filter(|_| self.swing.as_ref().map(|s| s.side) == Some(info.side))
                    .unwrap_or_else(|| {
                        let p = future_pos[info.side.index()];
                        Vector2::new(p.x, p.y)
                    });
                future_pos[info.side.index()] = Vector3::new(target.x, target.y, 0.0);
            }
            let contacts: Vec<ScheduledContact> = status
                .contacts
                .iter()
                .filter(|s| status.ramp[s.index()] > 0.02)
                .map(|s| ScheduledContact {
                    side: *s,
                    position: future_pos[s.index()],
                    ramp: status.ramp[s.index()],
                })
                .collect();
            let centroid = if contacts.is_empty() {
                future_pos[0].xy() * 0.5 + future_pos[1].xy() * 0.5
            } else {
                contacts
                    .iter()
                    .map(|c| c.position.xy())
                    .sum::<Vector2<f64>>()
                    / contacts.len() as f64
            };
            com_ref.push(Vector3::new(
                centroid.x,
                centroid.y,
                self.cfg.tvr.com_height,
            ));
            schedule.push(contacts);
        }
        (schedule, com_ref)
    }

    /// One control tick. `state` is the measured robot state; returns joint
    /// torques for the actuated joints.
    pub fn step(&mut self, state: &RobotState) -> ControlOutput {
        self.time += self.dt;
        let status = self.gait.step(self.dt);
        let kin = Kinematics::compute(&self.model, state);
        let dynamics = self.model.dynamics_terms(&kin, state);
        let a_inv = dynamics
            .a
            .clone()
            .cholesky()
            .expect("mass matrix SPD")
            .inverse();

        // ── Swing lifecycle ──
        match status.swing {
            None => self.swing = None,
            Some(info) => {
                let t0 = self.time - info.elapsed;
                let tf = t0 + info.duration;
                let need_new = self
                    .swing
                    .as_ref()
                    .map(|s| s.side != info.side)
                    .unwrap_or(true);
                if need_new {
                    let t_go = tf - self.time + 0.5 * self.gait.config().transition;
                    let target = self.plan_step(&kin, info.side, t_go);
                    let start = self.foot_pos(&kin, info.side);
                    self.swing = Some(ActiveSwing {
                        side: info.side,
                        traj: SwingTrajectory::new(
                            t0,
                            tf,
                            start,
                            Vector3::new(target.x, target.y, 0.0),
                            self.cfg.swing_apex,
                        ),
                        replanned: false,
                    });
                    self.last_step_target = Some(target);
                } else {
                    // The official planner call: once, at mid-swing, refit
                    // from the measured foot state for continuity.
                    let due = self
                        .swing
                        .as_ref()
                        .is_some_and(|s| !s.replanned && info.elapsed >= 0.5 * info.duration);
                    if due {
                        let t_go = tf - self.time + 0.5 * self.gait.config().transition;
                        let target = self.plan_step(&kin, info.side, t_go);
                        let pos = kin
                            .point_position(self.feet.body[info.side.index()], &self.feet.offset);
                        let vel = kin
                            .point_velocity(self.feet.body[info.side.index()], &self.feet.offset);
                        let sw = self.swing.as_mut().expect("swing active");
                        let (_, _, acc_ref) = sw.traj.eval(self.time);
                        sw.traj = SwingTrajectory::refit(
                            self.time,
                            tf,
                            (pos, vel, acc_ref),
                            Vector3::new(target.x, target.y, 0.0),
                            self.cfg.swing_apex,
                        );
                        sw.replanned = true;
                        self.last_step_target = Some(target);
                    }
                }
            }
        }

        // ── Priority stack: contact, body orientation, body position ──
        let contact_sides: Vec<Side> = status.contacts.clone();
        let contact = if contact_sides.is_empty() {
            None
        } else {
            let rows = 3 * contact_sides.len();
            let mut jc = DMat::zeros(rows, self.model.nv());
            let mut bias = DVec::zeros(rows);
            for (i, side) in contact_sides.iter().enumerate() {
                let body = self.feet.body[side.index()];
                jc.view_mut((3 * i, 0), (3, self.model.nv())).copy_from(
                    &self.model.point_jacobian(&kin, body, &self.feet.offset),
                );
                let jd = self.model.point_jdot_qdot(&kin, body, &self.feet.offset);
                for r in 0..3 {
                    bias[3 * i + r] = jd[r];
                }
            }
            Some(ContactConstraint {
                jacobian: jc,
                jdot_qd: bias,
            })
        };

        let base = 0; // floating base is the first body
        let base_pose = kin.pose[base];
        let base_rot = base_pose.rotation;
        let omega_world = kin.body_angular_velocity(base);
        let frame_j = self.model.frame_jacobian(&kin, base);
        let frame_bias = self.model.frame_jdot_qdot(&kin, base);

        // Horizontal base reference follows the stance centroid.
        let centroid = {
            let sum: Vector2<f64> = contact_sides
                .iter()
                .map(|s| self.foot_pos(&kin, *s).xy())
                .sum();
            if contact_sides.is_empty() {
                base_pose.translation.vector.xy()
            } else {
                sum / contact_sides.len() as f64
            }
        };
        let ref_xy = match &mut self.base_ref_xy {
            Some(r) => {
                let alpha = (self.dt / self.cfg.base_ref_tau).min(1.0);
                *r += (centroid - *r) * alpha;
                *r
            }
            None => {
                self.base_ref_xy = Some(centroid);
                centroid
            }
        };

        let mut tasks = Vec::new();
        for name in &self.cfg.task_stack {
            match name.as_str() {
                "body_orientation" => {
                    let err = (UnitQuaternion::identity() * base_rot.inverse()).scaled_axis();
                    let g = &self.cfg.body_orientation;
                    let xdd = Vector3::new(
                        g.kp[0] * err.x - g.kd[0] * omega_world.x,
                        g.kp[1] * err.y - g.kd[1] * omega_world.y,
                        g.kp[2] * err.z - g.kd[2] * omega_world.z,
                    );
                    tasks.push(TaskLevel {
                        name: name.clone(),
                        jacobian: DMat::from(frame_j.rows(0, 3)),
                        jdot_qd: DVec::from_column_slice(&frame_bias.as_slice()[0..3]),
                        xdd_cmd: DVec::from_column_slice(xdd.as_slice()),
                    });
                }
                "body_position" => {
                    let p = base_pose.translation.vector;
                    let v = kin.point_velocity(base, &Vector3::zeros());
                    let p_ref = Vector3::new(ref_xy.x, ref_xy.y, self.cfg.base_height);
                    let g = &self.cfg.body_position;
                    let xdd = Vector3::new(
                        g.kp[0] * (p_ref.x - p.x) - g.kd[0] * v.x,
                        g.kp[1] * (p_ref.y - p.y) - g.kd[1] * v.y,
                        g.kp[2] * (p_ref.z - p.z) - g.kd[2] * v.z,
                    );
                    tasks.push(TaskLevel {
                        name: name.clone(),
                        jacobian: self.model.point_jacobian(&kin, base, &Vector3::zeros()),
                        jdot_qd: DVec::from_column_slice(
                            self.model
                                .point_jdot_qdot(&kin, base, &Vector3::zeros())
                                .as_slice(),
                        ),
                        xdd_cmd: DVec::from_column_slice(xdd.as_slice()),
                    });
                }
                other => unreachable!("validated task name {other}"),
            }
        }
        let stack = PriorityStack { contact, tasks };
        let projected = project_tasks(&stack, &dynamics.a);

        // ── RMP leaves ──
        let witness = self.model.capsule_witness(&kin, self.feet.capsule[0], self.feet.capsule[1]);
        let mut leaves: Vec<RmpChild> = Vec::new();
        if let Some(sw) = &self.swing {
            let body = self.feet.body[sw.side.index()];
            let j = self.model.point_jacobian(&kin, body, &self.feet.offset);
            let (p_des, v_des, a_des) = sw.traj.eval(self.time);
            let pos = self.foot_pos(&kin, sw.side);
            let vel = self.foot_vel(&kin, sw.side);
            let g = &self.cfg.swing_attractor;
            let accel = Vector3::new(
                a_des.x + g.kp[0] * (p_des.x - pos.x) + g.kd[0] * (v_des.x - vel.x),
                a_des.y + g.kp[1] * (p_des.y - pos.y) + g.kd[1] * (v_des.y - vel.y),
                a_des.z + g.kp[2] * (p_des.z - pos.z) + g.kd[2] * (v_des.z - vel.z),
            );
            let metric = operational_inertia(&j, &a_inv);
            leaves.push(RmpChild {
                rmp: NaturalRmp {
                    force: &metric * DVec::from_column_slice(accel.as_slice()),
                    metric,
                },
                jacobian: j,
                jdot_qd: DVec::from_column_slice(
                    self.model.point_jdot_qdot(&kin, body, &self.feet.offset).as_slice(),
                ),
            });

            match self.cfg.avoidance {
                AvoidanceMode::CollisionRmp => {
                    let leaf = collision_rmp(witness.distance, witness.rate, &self.cfg.collision_rmp);
                    let natural = leaf.to_natural();
                    leaves.push(RmpChild {
                        rmp: natural,
                        jacobian: witness.jacobian_rel.clone(),
                        jdot_qd: DVec::from_element(1, witness.jdot_qdot),
                    });
                }
                AvoidanceMode::Apf => {
                    // Repulsion applied at the swing-shank witness point with
                    // an identity metric.
                    let swing_cap = self.feet.capsule[sw.side.index()];
                    let w = self.model.capsule_witness(&kin, swing_cap, self.feet.capsule[sw.side.other().index()]);
                    let accel = apf_baseline_accel(&w, &self.cfg.apf);
                    let local = kin.pose[self.feet.body[sw.side.index()]].inverse() * nalgebra::Point3::from(w.point_a);
                    let j = self.model.point_jacobian(&kin, self.feet.body[sw.side.index()], &local.coords);
                    let jd = self.model.point_jdot_qdot(&kin, self.feet.body[sw.side.index()], &local.coords);
                    leaves.push(RmpChild {
                        rmp: NaturalRmp {
                            force: DVec::from_column_slice(accel.as_slice()),
                            metric: DMat::identity(3, 3),
                        },
                        jacobian: j,
                        jdot_qd: DVec::from_column_slice(jd.as_slice()),
                    });
                }
                AvoidanceMode::None => {}
            }
        }

        let root = pullback(self.model.nv(), &leaves).expect("leaf dimensions consistent");
        let projected_rmp = modified_pullback(&root, &projected.n_k, &projected.qdd_cmd);
        let qdd_cmd = final_accel(&projected.qdd_cmd, &projected.n_k, &projected_rmp);

        // ── Reaction-force reference ──
        let need_plan = match &self.plan {
            None => true,
            Some(p) => self.time - p.made_at >= self.cfg.mpc_interval - 1e-9,
        };
        if need_plan {
            let (schedule, com_ref) = self.horizon_schedule(&kin);
            let plan = srb_reaction_forces(
                self.model.total_mass(),
                &self.model.com_position(&kin),
                &self.model.com_velocity(&kin),
                &com_ref,
                &schedule,
                &self.cfg.srb,
            );
            self.plan = Some(PlanState {
                made_at: self.time,
                plan,
            });
        }

        let force_contacts: Vec<Side> = contact_sides
            .iter()
            .copied()
            .filter(|s| status.ramp[s.index()] > 1e-6)
            .collect();
        let mut f_mpc = DVec::zeros(3 * force_contacts.len());
        {
            let fallback = static_split(
                self.model.total_mass(),
                &self.model.com_position(&kin),
                &force_contacts
                    .iter()
                    .map(|s| ScheduledContact {
                        side: *s,
                        position: self.foot_pos(&kin, *s),
                        ramp: status.ramp[s.index()].max(1e-3),
                    })
                    .collect::<Vec<_>>(),
                &self.cfg.srb,
            );
            for (i, side) in force_contacts.iter().enumerate() {
                let planned = self
                    .plan
                    .as_ref()
                    .and_then(|p| p.plan.first_force(*side))
                    .unwrap_or_else(|| {
                        fallback
                            .iter()
                            .find(|(s, _)| s == side)
                            .map(|(_, f)| *f)
                            .unwrap_or_else(Vector3::zeros)
                    });
                for r in 0..3 {
                    f_mpc[3 * i + r] = planned[r];
                }
            }
        }

        // WBC QP runs on the force-bearing contacts only.
        let qp_contact = if force_contacts.is_empty() {
            None
        } else {
            let rows = 3 * force_contacts.len();
            let mut jc = DMat::zeros(rows, self.model.nv());
            for (i, side) in force_contacts.iter().enumerate() {
                let body = self.feet.body[side.index()];
                jc.view_mut((3 * i, 0), (3, self.model.nv())).copy_from(
                    &self.model.point_jacobian(&kin, body, &self.feet.offset),
                );
            }
            Some(jc)
        };
        let bounds: Vec<ContactBound> = force_contacts
            .iter()
            .map(|s| ContactBound {
                friction_mu: self.cfg.friction_mu,
                fz_min: 0.0,
                fz_max: status.ramp[s.index()] * self.cfg.fz_max,
            })
            .collect();
        let nc3 = 3 * force_contacts.len();
        let problem = WbcQpProblem {
            contact_jacobian: qp_contact.unwrap_or_else(|| DMat::zeros(0, self.model.nv())),
            bounds,
            q1: DMat::identity(nc3, nc3) * self.cfg.qp_q1,
            q2: DMat::identity(6, 6) * self.cfg.qp_q2,
        };

        let (tau, fault, active_rows, qp_fallback) =
            match solve_wbc_qp(&problem, &dynamics, &qdd_cmd, &f_mpc) {
                Ok(sol) => {
                    let mut tau = sol.tau.clone();
                    for (i, _) in self.model.actuated_dofs().iter().enumerate() {
                        let limit = self.cfg.torque_limit[i % 3];
                        tau[i] = tau[i].clamp(-limit, limit);
                    }
                    (tau, None, sol.active_set.len(), false)
                }
                Err(e) => (self.prev_tau.clone(), Some(e.to_string()), 0, true),
            };
        self.prev_tau = tau.clone();

        let metric_eigs = projected_rmp.metric.clone().symmetric_eigen().eigenvalues;
        let contact_residual = stack
            .contact
            .as_ref()
            .map(|c| (&c.jacobian * &qdd_cmd + &c.jdot_qd).abs().max())
            .unwrap_or(0.0);
        let debug = StepDebug {
            time: self.time,
            phase: format!("{:?}", status.phase),
            task_residuals: projected.levels.iter().map(|l| l.residual).collect(),
            contact_residual,
            rmp_metric_min: metric_eigs.min(),
            rmp_metric_max: metric_eigs.max(),
            qp_active_rows: active_rows,
            qp_fallback,
            capsule_distance: witness.distance,
            base_height: state.q[2],
            planned_step: self.last_step_target.map(|t| [t.x, t.y]),
        };

        ControlOutput { tau, fault, debug }
    }

    /// Current phase, for the trial driver.
    pub fn phase(&self) -> GaitPhase {
        self.gait.status().phase
    }
}
