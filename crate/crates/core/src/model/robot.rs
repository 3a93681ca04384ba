//! Built kinematic-tree model and per-state kinematics/dynamics queries.
//!
//! Coordinate conventions:
//! - `q` packs, per body in topological order: floating joint as position (3)
//!   then unit quaternion (w, x, y, z), revolute joints as one angle.
//! - `qd` packs the floating base twist in the base frame (angular then
//!   linear) followed by joint rates, so `dim(qd) = 6 + n`.
//! - Internally all spatial quantities are Plücker vectors at the world
//!   origin: motion = (ω; v_O), force = (n_O; f).

use std::collections::BTreeMap;

use nalgebra::{
    Isometry3, Matrix3, Matrix6, Translation3, UnitQuaternion, UnitVector3, Vector3, Vector6,
};

use super::description::{JointType, ModelDescription, ModelError, WORLD};
use crate::linalg::{skew, DMat, DVec};

#[derive(Debug, Clone)]
pub enum Joint {
    Floating,
    Revolute(UnitVector3<f64>),
    Fixed,
}

impl Joint {
    pub fn nq(&self) -> usize {
        match self {
            Joint::Floating => 7,
            Joint::Revolute(_) => 1,
            Joint::Fixed => 0,
        }
    }
    pub fn nv(&self) -> usize {
        match self {
            Joint::Floating => 6,
            Joint::Revolute(_) => 1,
            Joint::Fixed => 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Body {
    pub name: String,
    /// Index of the parent body; `None` when attached to the world.
    pub parent: Option<usize>,
    pub joint: Joint,
    /// Pose of the body frame in the parent frame at zero joint position.
    pub transform_to_parent: Isometry3<f64>,
    pub mass: f64,
    pub com: Vector3<f64>,
    pub inertia_com: Matrix3<f64>,
    pub q_offset: usize,
    pub dof_offset: usize,
}

/// Capsule rigidly attached to a body, endpoints in the body frame.
#[derive(Debug, Clone)]
pub struct Capsule {
    pub body: usize,
    pub endpoint_a: Vector3<f64>,
    pub endpoint_b: Vector3<f64>,
    pub radius: f64,
}

/// Immutable robot model. Safe to share read-only across threads; every
/// per-state computation takes the state as input.
#[derive(Debug, Clone)]
pub struct RobotModel {
    bodies: Vec<Body>,
    name_index: BTreeMap<String, usize>,
    capsule_index: BTreeMap<String, usize>,
    nq: usize,
    nv: usize,
    pub capsules: Vec<Capsule>,
    /// Velocity coordinates driven by actuated joints, ascending.
    actuated_dofs: Vec<usize>,
    gravity: Vector3<f64>,
    /// ancestor_or_self[i] lists i and all its ancestors.
    ancestor_or_self: Vec<Vec<usize>>,
}

/// Generalized position/velocity pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub q: DVec,
    pub qd: DVec,
}

/// Mass matrix, combined Coriolis+gravity bias, and selection matrices.
#[derive(Debug, Clone)]
pub struct DynamicsTerms {
    pub a: DMat,
    pub bias: DVec,
    pub s_a: DMat,
    pub s_f: DMat,
}

pub fn build_model(desc: &ModelDescription) -> Result<RobotModel, ModelError> {
    desc.validate()?;

    // Topological order: repeatedly place bodies whose parent is placed.
    let mut order: Vec<usize> = Vec::with_capacity(desc.bodies.len());
    let mut placed: Vec<bool> = vec![false; desc.bodies.len()];
    let mut placed_names: BTreeMap<&str, usize> = BTreeMap::new();
    while order.len() < desc.bodies.len() {
        let before = order.len();
        for (i, b) in desc.bodies.iter().enumerate() {
            if placed[i] {
                continue;
            }
            if b.parent == WORLD || placed_names.contains_key(b.parent.as_str()) {
                placed_names.insert(&b.name, order.len());
                order.push(i);
                placed[i] = true;
            }
        }
        if order.len() == before {
            let stuck = desc.bodies.iter().find(|b| !placed_names.contains_key(b.name.as_str()));
            return Err(ModelError::Cycle(stuck.map(|b| b.name.clone()).unwrap_or_default()));
        }
    }

    let mut bodies = Vec::with_capacity(order.len());
    let mut name_index = BTreeMap::new();
    let mut nq = 0;
    let mut nv = 0;
    for (new_idx, &src_idx) in order.iter().enumerate() {
        let d = &desc.bodies[src_idx];
        let joint = match d.joint_type {
            JointType::Floating => Joint::Floating,
            JointType::Revolute => Joint::Revolute(UnitVector3::new_normalize(d.axis())),
            JointType::Fixed => Joint::Fixed,
        };
        let parent = if d.parent == WORLD {
            None
        } else {
            Some(placed_names[d.parent.as_str()])
        };
        let body = Body {
            name: d.name.clone(),
            parent,
            joint,
            transform_to_parent: d.transform_to_parent(),
            mass: d.mass,
            com: d.com(),
            inertia_com: d.inertia_matrix(),
            q_offset: nq,
            dof_offset: nv,
        };
        nq += body.joint.nq();
        nv += body.joint.nv();
        name_index.insert(d.name.clone(), new_idx);
        bodies.push(body);
    }

    let mut ancestor_or_self = Vec::with_capacity(bodies.len());
    for i in 0..bodies.len() {
        let mut chain = vec![i];
        let mut cur = bodies[i].parent;
        while let Some(p) = cur {
            chain.push(p);
            cur = bodies[p].parent;
        }
        ancestor_or_self.push(chain);
    }

    let capsules: Vec<Capsule> = desc
        .capsules
        .iter()
        .map(|c| Capsule {
            body: name_index[&c.body],
            endpoint_a: Vector3::from(c.endpoint_a),
            endpoint_b: Vector3::from(c.endpoint_b),
            radius: c.radius,
        })
        .collect();
    let capsule_index = desc
        .capsules
        .iter()
        .enumerate()
        .map(|(i, c)| (c.body.clone(), i))
        .collect();

    let mut actuated_dofs = Vec::new();
    for name in &desc.actuated_joint_names {
        let b = &bodies[name_index[name]];
        actuated_dofs.push(b.dof_offset);
    }
    actuated_dofs.sort_unstable();

    Ok(RobotModel {
        bodies,
        name_index,
        capsule_index,
        nq,
        nv,
        capsules,
        actuated_dofs,
        gravity: Vector3::from(desc.gravity),
        ancestor_or_self,
    })
}

impl RobotModel {
    pub fn nq(&self) -> usize {
        self.nq
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    pub fn num_bodies(&self) -> usize {
        self.bodies.len()
    }
    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }
    pub fn gravity(&self) -> Vector3<f64> {
        self.gravity
    }
    pub fn actuated_dofs(&self) -> &[usize] {
        &self.actuated_dofs
    }

    pub fn body_index(&self, name: &str) -> Result<usize, ModelError> {
        self.name_index
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnknownFrame(name.to_string()))
    }

    /// Capsule registered on the named body.
    pub fn capsule_on(&self, body_name: &str) -> Result<usize, ModelError> {
        self.capsule_index
            .get(body_name)
            .copied()
            .ok_or_else(|| ModelError::UnknownFrame(body_name.to_string()))
    }

    /// Neutral state: identity base pose, zero joint angles, zero velocity.
    pub fn neutral_state(&self) -> RobotState {
        let mut q = DVec::zeros(self.nq);
        for b in &self.bodies {
            if let Joint::Floating = b.joint {
                q[b.q_offset + 3] = 1.0; // quaternion w
            }
        }
        RobotState {
            q,
            qd: DVec::zeros(self.nv),
        }
    }

    pub fn check_state(&self, state: &RobotState) -> Result<(), ModelError> {
        if state.q.len() != self.nq || state.qd.len() != self.nv {
            return Err(ModelError::StateDim {
                expected_q: self.nq,
                expected_qd: self.nv,
                got_q: state.q.len(),
                got_qd: state.qd.len(),
            });
        }
        for b in &self.bodies {
            if let Joint::Floating = b.joint {
                let n = state.q.rows(b.q_offset + 3, 4).norm();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(ModelError::QuaternionNorm((n - 1.0).abs()));
                }
            }
        }
        Ok(())
    }

    /// Selection matrix onto the actuated coordinates, shape n_act × nv.
    pub fn actuation_matrix(&self) -> DMat {
        let mut s = DMat::zeros(self.actuated_dofs.len(), self.nv);
        for (row, &dof) in self.actuated_dofs.iter().enumerate() {
            s[(row, dof)] = 1.0;
        }
        s
    }

    /// Selection matrix onto the floating-base coordinates, shape 6 × nv.
    pub fn floating_matrix(&self) -> DMat {
        let mut s = DMat::zeros(6, self.nv);
        for b in &self.bodies {
            if let Joint::Floating = b.joint {
                for i in 0..6 {
                    s[(i, b.dof_offset + i)] = 1.0;
                }
            }
        }
        s
    }
}

impl RobotState {
    /// Advance positions by `qd · dt` in the velocity chart: quaternion via the
    /// exponential map of the body angular rate, base position via the rotated
    /// body-frame linear rate.
    pub fn integrated(&self, model: &RobotModel, dt: f64) -> RobotState {
        let mut q = self.q.clone();
        for b in model.bodies() {
            match &b.joint {
                Joint::Floating => {
                    let quat = base_quat(&self.q, b.q_offset);
                    let omega = Vector3::new(
                        self.qd[b.dof_offset],
                        self.qd[b.dof_offset + 1],
                        self.qd[b.dof_offset + 2],
                    );
                    let vel = Vector3::new(
                        self.qd[b.dof_offset + 3],
                        self.qd[b.dof_offset + 4],
                        self.qd[b.dof_offset + 5],
                    );
                    let dp = quat * (vel * dt);
                    q[b.q_offset] += dp.x;
                    q[b.q_offset + 1] += dp.y;
                    q[b.q_offset + 2] += dp.z;
                    let next = quat * UnitQuaternion::from_scaled_axis(omega * dt);
                    q[b.q_offset + 3] = next.w;
                    q[b.q_offset + 4] = next.i;
                    q[b.q_offset + 5] = next.j;
                    q[b.q_offset + 6] = next.k;
                }
                Joint::Revolute(_) => {
                    q[b.q_offset] += self.qd[b.dof_offset] * dt;
                }
                Joint::Fixed => {}
            }
        }
        RobotState {
            q,
            qd: self.qd.clone(),
        }
    }

    /// State displaced along velocity direction `dir` by `eps` with unchanged
    /// velocities. Used by finite-difference checks.
    pub fn perturbed(&self, model: &RobotModel, dir: &DVec, eps: f64) -> RobotState {
        let moved = RobotState {
            q: self.q.clone(),
            qd: dir.clone(),
        }
        .integrated(model, eps);
        RobotState {
            q: moved.q,
            qd: self.qd.clone(),
        }
    }
}

fn base_quat(q: &DVec, offset: usize) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
        q[offset + 3],
        q[offset + 4],
        q[offset + 5],
        q[offset + 6],
    ))
}

/// Per-state kinematic cache: world poses, per-DoF motion subspaces, body
/// spatial velocities and zero-acceleration biases, world spatial inertias.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub pose: Vec<Isometry3<f64>>,
    /// World Plücker motion column per velocity coordinate.
    pub dof_axis: Vec<Vector6<f64>>,
    pub dof_body: Vec<usize>,
    pub vel: Vec<Vector6<f64>>,
    /// Spatial acceleration with q̈ = 0 (gravity not included).
    pub acc_bias: Vec<Vector6<f64>>,
    pub inertia_world: Vec<Matrix6<f64>>,
}

fn motion_cross(v: &Vector6<f64>, m: &Vector6<f64>) -> Vector6<f64> {
    let (w, vl) = split(v);
    let (mw, mv) = split(m);
    join(&w.cross(&mw), &(w.cross(&mv) + vl.cross(&mw)))
}

fn force_cross(v: &Vector6<f64>, f: &Vector6<f64>) -> Vector6<f64> {
    let (w, vl) = split(v);
    let (n, fl) = split(f);
    join(&(w.cross(&n) + vl.cross(&fl)), &w.cross(&fl))
}

fn split(v: &Vector6<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (
        Vector3::new(v[0], v[1], v[2]),
        Vector3::new(v[3], v[4], v[5]),
    )
}

fn join(a: &Vector3<f64>, b: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

impl Kinematics {
    pub fn compute(model: &RobotModel, state: &RobotState) -> Kinematics {
        let nb = model.num_bodies();
        let mut pose = Vec::with_capacity(nb);
        let mut dof_axis = vec![Vector6::zeros(); model.nv()];
        let mut dof_body = vec![0; model.nv()];
        let mut vel = vec![Vector6::zeros(); nb];
        let mut acc_bias = vec![Vector6::zeros(); nb];
        let mut inertia_world = Vec::with_capacity(nb);

        for (i, b) in model.bodies().iter().enumerate() {
            let parent_pose = match b.parent {
                Some(p) => pose[p],
                None => Isometry3::identity(),
            };
            let joint_pose = match &b.joint {
                Joint::Floating => {
                    let t = Translation3::new(
                        state.q[b.q_offset],
                        state.q[b.q_offset + 1],
                        state.q[b.q_offset + 2],
                    );
                    Isometry3::from_parts(t, base_quat(&state.q, b.q_offset))
                }
                Joint::Revolute(axis) => Isometry3::rotation(axis.into_inner() * state.q[b.q_offset]),
                Joint::Fixed => Isometry3::identity(),
            };
            let world = parent_pose * b.transform_to_parent * joint_pose;
            let rot = world.rotation.to_rotation_matrix();
            let p = world.translation.vector;

            let parent_vel = b.parent.map(|p| vel[p]).unwrap_or_else(Vector6::zeros);
            let parent_acc = b.parent.map(|p| acc_bias[p]).unwrap_or_else(Vector6::zeros);
            let mut v = parent_vel;
            match &b.joint {
                Joint::Floating => {
                    for k in 0..3 {
                        let e = rot * Vector3::ith(k, 1.0);
                        dof_axis[b.dof_offset + k] = join(&e, &p.cross(&e));
                        dof_body[b.dof_offset + k] = i;
                    }
                    for k in 0..3 {
                        let e = rot * Vector3::ith(k, 1.0);
                        dof_axis[b.dof_offset + 3 + k] = join(&Vector3::zeros(), &e);
                        dof_body[b.dof_offset + 3 + k] = i;
                    }
                    for k in 0..6 {
                        v += dof_axis[b.dof_offset + k] * state.qd[b.dof_offset + k];
                    }
                }
                Joint::Revolute(axis) => {
                    let a_w = rot * axis.into_inner();
                    dof_axis[b.dof_offset] = join(&a_w, &p.cross(&a_w));
                    dof_body[b.dof_offset] = i;
                    v += dof_axis[b.dof_offset] * state.qd[b.dof_offset];
                }
                Joint::Fixed => {}
            }
            // ṡ = v_body × s for axes fixed in this body, so with q̈ = 0 the
            // joint contributes (v × s) q̇ to the spatial acceleration.
            let mut a = parent_acc;
            for k in 0..b.joint.nv() {
                let dof = b.dof_offset + k;
                a += motion_cross(&v, &dof_axis[dof]) * state.qd[dof];
            }

            let c_w = rot * b.com + p;
            let i_cw = rot.matrix() * b.inertia_com * rot.matrix().transpose();
            let cx = skew(&c_w);
            let mut iw = Matrix6::zeros();
            iw.fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&(i_cw + b.mass * cx * cx.transpose()));
            iw.fixed_view_mut::<3, 3>(0, 3).copy_from(&(b.mass * cx));
            iw.fixed_view_mut::<3, 3>(3, 0)
                .copy_from(&(b.mass * cx.transpose()));
            iw.fixed_view_mut::<3, 3>(3, 3)
                .copy_from(&(Matrix3::identity() * b.mass));

            pose.push(world);
            vel[i] = v;
            acc_bias[i] = a;
            inertia_world.push(iw);
        }

        Kinematics {
            pose,
            dof_axis,
            dof_body,
            vel,
            acc_bias,
            inertia_world,
        }
    }

    /// World position of a body-frame point.
    pub fn point_position(&self, body: usize, offset: &Vector3<f64>) -> Vector3<f64> {
        (self.pose[body] * nalgebra::Point3::from(*offset)).coords
    }

    /// World velocity of a body-fixed point.
    pub fn point_velocity(&self, body: usize, offset: &Vector3<f64>) -> Vector3<f64> {
        let p = self.point_position(body, offset);
        let (w, v_o) = split(&self.vel[body]);
        v_o + w.cross(&p)
    }

    pub fn body_angular_velocity(&self, body: usize) -> Vector3<f64> {
        split(&self.vel[body]).0
    }
}

impl RobotModel {
    /// Generalized mass matrix via composite world-frame inertias:
    /// `A[j,k] = s_jᵀ · I_c[deeper body] · s_k` over DoF pairs on a common
    /// root path.
    pub fn mass_matrix(&self, kin: &Kinematics) -> DMat {
        let nb = self.num_bodies();
        let mut composite = kin.inertia_world.clone();
        for i in (0..nb).rev() {
            if let Some(p) = self.bodies[i].parent {
                let child = composite[i];
                composite[p] += child;
            }
        }
        let mut a = DMat::zeros(self.nv, self.nv);
        for j in 0..self.nv {
            let bj = kin.dof_body[j];
            for k in j..self.nv {
                let bk = kin.dof_body[k];
                let deeper = if self.ancestor_or_self[bk].contains(&bj) {
                    Some(bk)
                } else if self.ancestor_or_self[bj].contains(&bk) {
                    Some(bj)
                } else {
                    None
                };
                if let Some(d) = deeper {
                    let val = (kin.dof_axis[j].transpose() * composite[d] * kin.dof_axis[k])[0];
                    a[(j, k)] = val;
                    a[(k, j)] = val;
                }
            }
        }
        a
    }

    /// Combined Coriolis/centrifugal and gravity vector: the generalized force
    /// that sustains the current motion with q̈ = 0 (recursive Newton-Euler).
    pub fn bias_forces(&self, kin: &Kinematics, _state: &RobotState) -> DVec {
        let nb = self.num_bodies();
        let grav = join(&Vector3::zeros(), &(-self.gravity));
        let mut f: Vec<Vector6<f64>> = Vec::with_capacity(nb);
        for i in 0..nb {
            let a_total = kin.acc_bias[i] + grav;
            let iw = &kin.inertia_world[i];
            let momentum = iw * kin.vel[i];
            f.push(iw * a_total + force_cross(&kin.vel[i], &momentum));
        }
        for i in (0..nb).rev() {
            if let Some(p) = self.bodies[i].parent {
                let fi = f[i];
                f[p] += fi;
            }
        }
        let mut bias = DVec::zeros(self.nv);
        for dof in 0..self.nv {
            bias[dof] = kin.dof_axis[dof].dot(&f[kin.dof_body[dof]]);
        }
        bias
    }

    pub fn dynamics_terms(&self, kin: &Kinematics, state: &RobotState) -> DynamicsTerms {
        DynamicsTerms {
            a: self.mass_matrix(kin),
            bias: self.bias_forces(kin, state),
            s_a: self.actuation_matrix(),
            s_f: self.floating_matrix(),
        }
    }

    fn path_dofs(&self, body: usize) -> impl Iterator<Item = usize> + '_ {
        self.ancestor_or_self[body]
            .iter()
            .flat_map(move |&b| {
                let off = self.bodies[b].dof_offset;
                (0..self.bodies[b].joint.nv()).map(move |k| off + k)
            })
    }

    /// 3×nv Jacobian of the world velocity of a body-fixed point.
    pub fn point_jacobian(&self, kin: &Kinematics, body: usize, offset: &Vector3<f64>) -> DMat {
        let p = kin.point_position(body, offset);
        let mut j = DMat::zeros(3, self.nv);
        for dof in self.path_dofs(body) {
            let (w, v_o) = split(&kin.dof_axis[dof]);
            let col = v_o + w.cross(&p);
            j[(0, dof)] = col.x;
            j[(1, dof)] = col.y;
            j[(2, dof)] = col.z;
        }
        j
    }

    /// 6×nv spatial Jacobian of a body frame: rows are world angular velocity
    /// then world linear velocity of the frame origin.
    pub fn frame_jacobian(&self, kin: &Kinematics, body: usize) -> DMat {
        let p = kin.pose[body].translation.vector;
        let mut j = DMat::zeros(6, self.nv);
        for dof in self.path_dofs(body) {
            let (w, v_o) = split(&kin.dof_axis[dof]);
            let lin = v_o + w.cross(&p);
            for r in 0..3 {
                j[(r, dof)] = w[r];
                j[(r + 3, dof)] = lin[r];
            }
        }
        j
    }

    /// Classical acceleration of a body-fixed point with q̈ = 0, i.e. J̇ q̇ of
    /// the point task.
    pub fn point_jdot_qdot(&self, kin: &Kinematics, body: usize, offset: &Vector3<f64>) -> Vector3<f64> {
        let p = kin.point_position(body, offset);
        let (w, v_o) = split(&kin.vel[body]);
        let (alpha, a_o) = split(&kin.acc_bias[body]);
        let v_p = v_o + w.cross(&p);
        a_o + alpha.cross(&p) + w.cross(&v_p)
    }

    /// Spatial J̇ q̇ of a body frame: world angular acceleration and classical
    /// linear acceleration of the frame origin, with q̈ = 0.
    pub fn frame_jdot_qdot(&self, kin: &Kinematics, body: usize) -> Vector6<f64> {
        let p = kin.pose[body].translation.vector;
        let (w, v_o) = split(&kin.vel[body]);
        let (alpha, a_o) = split(&kin.acc_bias[body]);
        let v_p = v_o + w.cross(&p);
        join(&alpha, &(a_o + alpha.cross(&p) + w.cross(&v_p)))
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn com_position(&self, kin: &Kinematics) -> Vector3<f64> {
        let mut c = Vector3::zeros();
        for (i, b) in self.bodies.iter().enumerate() {
            c += b.mass * kin.point_position(i, &b.com);
        }
        c / self.total_mass()
    }

    pub fn com_velocity(&self, kin: &Kinematics) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        for (i, b) in self.bodies.iter().enumerate() {
            v += b.mass * kin.point_velocity(i, &b.com);
        }
        v / self.total_mass()
    }

    pub fn com_jacobian(&self, kin: &Kinematics) -> DMat {
        let mut j = DMat::zeros(3, self.nv);
        for (i, b) in self.bodies.iter().enumerate() {
            j += self.point_jacobian(kin, i, &b.com) * b.mass;
        }
        j / self.total_mass()
    }

    /// ½ q̇ᵀ A q̇ evaluated per body from world spatial velocities.
    pub fn kinetic_energy(&self, kin: &Kinematics) -> f64 {
        (0..self.num_bodies())
            .map(|i| 0.5 * (kin.vel[i].transpose() * kin.inertia_world[i] * kin.vel[i])[0])
            .sum()
    }

    pub fn potential_energy(&self, kin: &Kinematics) -> f64 {
        self.bodies
            .iter()
            .enumerate()
            .map(|(i, b)| -b.mass * self.gravity.dot(&kin.point_position(i, &b.com)))
            .sum()
    }
}
