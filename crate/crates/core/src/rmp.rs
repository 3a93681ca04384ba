//! Riemannian motion policy algebra: canonical/natural forms, the
//! pushforward/pullback/resolve operators, and the two leaf policy families
//! (PD attractor, one-dimensional collision repulsor).

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{pinv_psd, symmetrize, DMat, DVec, PINV_REL_TOL};
use crate::model::{Kinematics, RobotModel, RobotState};

/// Natural-form RMP: virtual force paired with its Riemannian metric.
#[derive(Debug, Clone)]
pub struct NaturalRmp {
    pub force: DVec,
    pub metric: DMat,
}

/// Canonical-form RMP: acceleration policy paired with its metric.
#[derive(Debug, Clone)]
pub struct CanonicalRmp {
    pub accel: DVec,
    pub metric: DMat,
}

impl CanonicalRmp {
    /// f = M a.
    pub fn to_natural(&self) -> NaturalRmp {
        NaturalRmp {
            force: &self.metric * &self.accel,
            metric: self.metric.clone(),
        }
    }
}

impl NaturalRmp {
    pub fn zeros(dim: usize) -> NaturalRmp {
        NaturalRmp {
            force: DVec::zeros(dim),
            metric: DMat::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.force.len()
    }
}

/// a = M† f with a rank-revealing pseudo-inverse; the metric carries over.
pub fn resolve(rmp: &NaturalRmp) -> CanonicalRmp {
    CanonicalRmp {
        accel: pinv_psd(&rmp.metric, PINV_REL_TOL) * &rmp.force,
        metric: rmp.metric.clone(),
    }
}

/// A child RMP with the Jacobian and velocity-product bias of the map from
/// the parent space to its task space.
#[derive(Debug, Clone)]
pub struct RmpChild {
    pub rmp: NaturalRmp,
    pub jacobian: DMat,
    pub jdot_qd: DVec,
}

#[derive(Debug, Error)]
pub enum RmpError {
    #[error("child {index}: jacobian is {rows}×{cols}, expected {dim}×{parent_dim}")]
    DimensionMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        dim: usize,
        parent_dim: usize,
    },
}

/// Pullback of child RMPs onto a `parent_dim`-dimensional parent space:
/// f′ = Σ Jᵢᵀ(fᵢ − Mᵢ J̇ᵢq̇), M′ = Σ Jᵢᵀ Mᵢ Jᵢ.
pub fn pullback(parent_dim: usize, children: &[RmpChild]) -> Result<NaturalRmp, RmpError> {
    let mut force = DVec::zeros(parent_dim);
    let mut metric = DMat::zeros(parent_dim, parent_dim);
    for (index, c) in children.iter().enumerate() {
        let dim = c.rmp.dim();
        if c.jacobian.nrows() != dim
            || c.jacobian.ncols() != parent_dim
            || c.jdot_qd.len() != dim
        {
            return Err(RmpError::DimensionMismatch {
                index,
                rows: c.jacobian.nrows(),
                cols: c.jacobian.ncols(),
                dim,
                parent_dim,
            });
        }
        let jt = c.jacobian.transpose();
        force += &jt * (&c.rmp.force - &c.rmp.metric * &c.jdot_qd);
        metric += &jt * &c.rmp.metric * &c.jacobian;
    }
    Ok(NaturalRmp {
        force,
        metric: symmetrize(&metric),
    })
}

/// Task-space evaluation of a map from configuration space.
#[derive(Debug, Clone)]
pub struct TaskEval {
    pub x: DVec,
    pub xd: DVec,
    pub jacobian: DMat,
    pub jdot_qd: DVec,
}

/// Differentiable map from the configuration space to a task space.
pub trait TaskMap {
    fn dim(&self) -> usize;
    fn eval(&self, model: &RobotModel, state: &RobotState, kin: &Kinematics) -> TaskEval;
}

/// Propagate position and velocity to a task space: x = map(q), ẋ = J q̇.
pub fn pushforward(
    model: &RobotModel,
    state: &RobotState,
    kin: &Kinematics,
    map: &dyn TaskMap,
) -> (DVec, DVec) {
    let eval = map.eval(model, state, kin);
    (eval.x, eval.xd)
}

/// World position of a body-fixed point.
pub struct PointTask {
    pub body: usize,
    pub offset: Vector3<f64>,
}

impl TaskMap for PointTask {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, model: &RobotModel, state: &RobotState, kin: &Kinematics) -> TaskEval {
        let jacobian = model.point_jacobian(kin, self.body, &self.offset);
        let xd = &jacobian * &state.qd;
        TaskEval {
            x: DVec::from_column_slice(kin.point_position(self.body, &self.offset).as_slice()),
            xd,
            jacobian,
            jdot_qd: DVec::from_column_slice(
                model.point_jdot_qdot(kin, self.body, &self.offset).as_slice(),
            ),
        }
    }
}

/// Selected joint angles as a task space (posture regulation, identity-style
/// tests).
pub struct JointPositionTask {
    /// (q index, qd index) pairs of the selected one-DoF joints.
    pub coords: Vec<(usize, usize)>,
}

impl JointPositionTask {
    pub fn all_revolute(model: &RobotModel) -> JointPositionTask {
        let coords = model
            .bodies()
            .iter()
            .filter(|b| matches!(b.joint, crate::model::Joint::Revolute(_)))
            .map(|b| (b.q_offset, b.dof_offset))
            .collect();
        JointPositionTask { coords }
    }
}

impl TaskMap for JointPositionTask {
    fn dim(&self) -> usize {
        self.coords.len()
    }
    fn eval(&self, model: &RobotModel, state: &RobotState, _kin: &Kinematics) -> TaskEval {
        let dim = self.coords.len();
        let mut x = DVec::zeros(dim);
        let mut xd = DVec::zeros(dim);
        let mut jacobian = DMat::zeros(dim, model.nv());
        for (row, &(qi, vi)) in self.coords.iter().enumerate() {
            x[row] = state.q[qi];
            xd[row] = state.qd[vi];
            jacobian[(row, vi)] = 1.0;
        }
        TaskEval {
            x,
            xd,
            jacobian,
            jdot_qd: DVec::zeros(dim),
        }
    }
}

/// Surface distance between two registered capsules as a 1-D task space.
pub struct DistanceTask {
    pub capsule_a: usize,
    pub capsule_b: usize,
}

impl TaskMap for DistanceTask {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, model: &RobotModel, _state: &RobotState, kin: &Kinematics) -> TaskEval {
        let w = model.capsule_witness(kin, self.capsule_a, self.capsule_b);
        TaskEval {
            x: DVec::from_element(1, w.distance),
            xd: DVec::from_element(1, w.rate),
            jacobian: w.jacobian_rel,
            jdot_qd: DVec::from_element(1, w.jdot_qdot),
        }
    }
}

/// PD attractor gains and setpoint.
#[derive(Debug, Clone)]
pub struct AttractorParams {
    pub k_p: DMat,
    pub k_d: DMat,
    pub x_des: DVec,
    pub xd_des: DVec,
    pub xdd_des: DVec,
}

impl AttractorParams {
    pub fn isotropic(dim: usize, k_p: f64, k_d: f64, x_des: DVec) -> AttractorParams {
        AttractorParams {
            k_p: DMat::identity(dim, dim) * k_p,
            k_d: DMat::identity(dim, dim) * k_d,
            x_des,
            xd_des: DVec::zeros(dim),
            xdd_des: DVec::zeros(dim),
        }
    }
}

/// Attractor policy: a = ẍ_des + K_p(x_des − x) + K_d(ẋ_des − ẋ), paired with
/// a caller-supplied metric (the operational-space inertia in the controller).
pub fn attractor_rmp(x: &DVec, xd: &DVec, params: &AttractorParams, metric: DMat) -> CanonicalRmp {
    let accel =
        &params.xdd_des + &params.k_p * (&params.x_des - x) + &params.k_d * (&params.xd_des - xd);
    CanonicalRmp { accel, metric }
}

/// Collision-avoidance RMP parameters, named after the usual symbols.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollisionRmpParams {
    /// Repulsion gain, m/s².
    pub k_p: f64,
    /// Damping gain, 1/s.
    pub k_d: f64,
    /// Repulsion length scale, m.
    pub l_p: f64,
    /// Damping length scale, m.
    pub l_d: f64,
    /// Metric length scale, m.
    pub l_m: f64,
    /// Velocity gate scale, m/s.
    pub v_d: f64,
    pub eps_d: f64,
    pub eps_m: f64,
    /// Priority weight of the collision RMP relative to other RMPs.
    pub mu: f64,
    /// Distance beyond which the RMP is disabled, m.
    pub r: f64,
}

impl Default for CollisionRmpParams {
    fn default() -> Self {
        CollisionRmpParams {
            k_p: 12.0,
            k_d: 8.0,
            l_p: 0.01,
            l_d: 0.03,
            l_m: 0.01,
            v_d: 0.1,
            eps_d: 1e-3,
            eps_m: 1e-3,
            mu: 1.0,
            r: 0.05,
        }
    }
}

impl CollisionRmpParams {
    pub fn validate(&self) -> Result<(), String> {
        let pos = [
            ("k_p", self.k_p),
            ("k_d", self.k_d),
            ("l_p", self.l_p),
            ("l_d", self.l_d),
            ("l_m", self.l_m),
            ("v_d", self.v_d),
            ("mu", self.mu),
            ("r", self.r),
        ];
        for (name, v) in pos {
            if !(v > 0.0) {
                return Err(format!("collision rmp parameter {name} must be > 0, got {v}"));
            }
        }
        for (name, v) in [("eps_d", self.eps_d), ("eps_m", self.eps_m)] {
            if !(v >= 1e-9) {
                return Err(format!("collision rmp parameter {name} must be >= 1e-9, got {v}"));
            }
        }
        Ok(())
    }
}

/// Velocity gate: 1 at fast approach, 0 at fast retreat, ½ at rest.
pub fn sigma(xd: f64, v_d: f64) -> f64 {
    1.0 - 1.0 / (1.0 + (-xd / v_d).exp())
}

/// Distance cutoff polynomial, factored so g(0) = 1, g(r) = 0 and g′(r) = 0
/// hold exactly.
pub fn cutoff_g(x: f64, r: f64) -> f64 {
    if x > r {
        0.0
    } else {
        let s = 1.0 - x / r;
        s * s
    }
}

pub fn cutoff_g_prime(x: f64, r: f64) -> f64 {
    if x > r {
        0.0
    } else {
        (2.0 / r) * (x / r - 1.0)
    }
}

/// One-dimensional repulsive policy and metric on the witness-distance space.
///
/// The damping and metric denominators clamp the distance at zero so both
/// stay finite and the metric stays nonnegative under penetration.
pub fn collision_rmp(x: f64, xd: f64, params: &CollisionRmpParams) -> CanonicalRmp {
    let s = sigma(xd, params.v_d);
    let x_pos = x.max(0.0);
    let accel = params.k_p * (-x / params.l_p).exp()
        - params.k_d * s * xd / (x_pos / params.l_d + params.eps_d);
    let metric = s * cutoff_g(x, params.r) * params.mu / (x_pos / params.l_m + params.eps_m);
    CanonicalRmp {
        accel: DVec::from_element(1, accel),
        metric: DMat::from_element(1, 1, metric),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(rng: &mut ChaCha8Rng, dim: usize) -> DMat {
        let m = DMat::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose()
    }

    fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> DVec {
        DVec::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_pullback_is_identity() {
        let rmp = NaturalRmp {
            force: DVec::from_column_slice(&[1.0, -2.0, 0.5]),
            metric: DMat::identity(3, 3) * 2.0,
        };
        let child = RmpChild {
            rmp: rmp.clone(),
            jacobian: DMat::identity(3, 3),
            jdot_qd: DVec::zeros(3),
        };
        let parent = pullback(3, &[child]).unwrap();
        assert!((parent.force - rmp.force).norm() < 1e-15);
        assert!((parent.metric - rmp.metric).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_children_compose_diagonally() {
        let mk = |dir: usize, m: f64, dim: usize| {
            let mut j = DMat::zeros(1, dim);
            j[(0, dir)] = 1.0;
            RmpChild {
                rmp: NaturalRmp {
                    force: DVec::from_element(1, 1.0),
                    metric: DMat::from_element(1, 1, m),
                },
                jacobian: j,
                jdot_qd: DVec::zeros(1),
            }
        };
        let parent = pullback(4, &[mk(0, 3.0, 4), mk(1, 5.0, 4)]).unwrap();
        let expect = DMat::from_diagonal(&DVec::from_column_slice(&[3.0, 5.0, 0.0, 0.0]));
        assert!((parent.metric - expect).norm() < 1e-15);
    }

    #[test]
    fn pullback_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let nv = 5;
            let children: Vec<RmpChild> = (0..3)
                .map(|_| {
                    let dim = rng.random_range(1..4);
                    RmpChild {
                        rmp: NaturalRmp {
                            force: random_vec(&mut rng, dim),
                            metric: random_psd(&mut rng, dim),
                        },
                        jacobian: DMat::from_fn(dim, nv, |_, _| rng.random_range(-1.0..1.0)),
                        jdot_qd: random_vec(&mut rng, dim),
                    }
                })
                .collect();
            let got = pullback(nv, &children).unwrap();
            let mut force = DVec::zeros(nv);
            let mut metric = DMat::zeros(nv, nv);
            for c in &children {
                force += c.jacobian.transpose() * (&c.rmp.force - &c.rmp.metric * &c.jdot_qd);
                metric += c.jacobian.transpose() * &c.rmp.metric * &c.jacobian;
            }
            assert!((got.force - force).norm() < 1e-12);
            assert!((got.metric - metric).norm() < 1e-12);
        }
    }

    #[test]
    fn pullback_dimension_mismatch_reported() {
        let child = RmpChild {
            rmp: NaturalRmp::zeros(2),
            jacobian: DMat::zeros(2, 3),
            jdot_qd: DVec::zeros(2),
        };
        assert!(pullback(4, &[child]).is_err());
    }

    #[test]
    fn resolve_identity_metric() {
        let rmp = NaturalRmp {
            force: DVec::from_column_slice(&[4.0, 1.0]),
            metric: DMat::identity(2, 2),
        };
        let c = resolve(&rmp);
        assert!((c.accel - rmp.force).norm() < 1e-14);
    }

    #[test]
    fn resolve_annihilates_null_direction() {
        let rmp = NaturalRmp {
            force: DVec::from_column_slice(&[4.0, 1.0]),
            metric: DMat::from_diagonal(&DVec::from_column_slice(&[2.0, 0.0])),
        };
        let c = resolve(&rmp);
        assert!((c.accel[0] - 2.0).abs() < 1e-14);
        assert_eq!(c.accel[1], 0.0);
    }

    #[test]
    fn resolve_residual_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_psd(&mut rng, 4);
            let f = &m * random_vec(&mut rng, 4); // force in range(M)
            let rmp = NaturalRmp {
                force: f.clone(),
                metric: m.clone(),
            };
            let a = resolve(&rmp).accel;
            assert!((m * a - f).norm() < 1e-10);
        }
    }

    #[test]
    fn attractor_zero_error_zero_accel() {
        let x = DVec::from_column_slice(&[0.3, -0.1]);
        let params = AttractorParams::isotropic(2, 10.0, 2.0, x.clone());
        let out = attractor_rmp(&x, &DVec::zeros(2), &params, DMat::identity(2, 2));
        assert_eq!(out.accel.norm(), 0.0);
    }

    #[test]
    fn attractor_proportional_only() {
        let params = AttractorParams {
            k_p: DMat::identity(3, 3),
            k_d: DMat::zeros(3, 3),
            x_des: DVec::from_column_slice(&[0.1, 0.0, 0.0]),
            xd_des: DVec::zeros(3),
            xdd_des: DVec::zeros(3),
        };
        let out = attractor_rmp(
            &DVec::zeros(3),
            &DVec::from_column_slice(&[5.0, 5.0, 5.0]),
            &params,
            DMat::identity(3, 3),
        );
        assert!((out.accel - DVec::from_column_slice(&[0.1, 0.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn attractor_matches_coordinatewise_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let dim = 3;
            let kp = random_psd(&mut rng, dim);
            let kd = random_psd(&mut rng, dim);
            let params = AttractorParams {
                k_p: kp.clone(),
                k_d: kd.clone(),
                x_des: random_vec(&mut rng, dim),
                xd_des: random_vec(&mut rng, dim),
                xdd_des: random_vec(&mut rng, dim),
            };
            let x = random_vec(&mut rng, dim);
            let xd = random_vec(&mut rng, dim);
            let out = attractor_rmp(&x, &xd, &params, DMat::identity(dim, dim));
            for i in 0..dim {
                let mut expect = params.xdd_des[i];
                for j in 0..dim {
                    expect += kp[(i, j)] * (params.x_des[j] - x[j]);
                    expect += kd[(i, j)] * (params.xd_des[j] - xd[j]);
                }
                assert!((out.accel[i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collision_metric_zero_beyond_cutoff() {
        let params = CollisionRmpParams::default();
        let out = collision_rmp(params.r * 1.5, -0.2, &params);
        assert_eq!(out.metric[(0, 0)], 0.0);
    }

    #[test]
    fn cutoff_endpoints_exact() {
        for r in [0.013, 0.05, 1.0] {
            assert_eq!(cutoff_g(0.0, r), 1.0);
            assert_eq!(cutoff_g(r, r), 0.0);
            assert_eq!(cutoff_g_prime(r, r), 0.0);
        }
    }

    #[test]
    fn sigma_limits() {
        assert!((sigma(0.0, 0.1) - 0.5).abs() < 1e-15);
        assert!(sigma(100.0, 0.1) < 1e-10);
        assert!(sigma(-100.0, 0.1) > 1.0 - 1e-10);
    }

    #[test]
    fn collision_rmp_matches_independent_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let params = CollisionRmpParams {
                k_p: rng.random_range(0.1..20.0),
                k_d: rng.random_range(0.1..20.0),
                l_p: rng.random_range(0.005..0.1),
                l_d: rng.random_range(0.005..0.1),
                l_m: rng.random_range(0.005..0.1),
                v_d: rng.random_range(0.01..1.0),
                eps_d: rng.random_range(1e-6..1e-2),
                eps_m: rng.random_range(1e-6..1e-2),
                mu: rng.random_range(0.1..10.0),
                r: rng.random_range(0.01..0.2),
            };
            let x = rng.random_range(0.0..0.3);
            let xd = rng.random_range(-1.0..1.0);
            let out = collision_rmp(x, xd, &params);
            // Independent scalar transcription of the policy/metric pair.
            let sig = 1.0 - 1.0 / (1.0 + f64::exp(-xd / params.v_d));
            let a = params.k_p * f64::exp(-x / params.l_p)
                - params.k_d * sig * xd / (x / params.l_d + params.eps_d);
            let g = if x > params.r {
                0.0
            } else {
                x * x / (params.r * params.r) - 2.0 * x / params.r + 1.0
            };
            let m = sig * g * params.mu / (x / params.l_m + params.eps_m);
            assert!((out.accel[0] - a).abs() < 1e-12 * (1.0 + a.abs()));
            assert!((out.metric[(0, 0)] - m).abs() < 1e-12 * (1.0 + m.abs()));
        }
    }

    #[test]
    fn collision_repulsion_always_positive() {
        let params = CollisionRmpParams::default();
        for x in [-0.01, 0.0, 0.01, 0.04, 0.2, 1.0] {
            let first_term = params.k_p * (-x / params.l_p).exp();
            assert!(first_term > 0.0);
        }
    }
}
