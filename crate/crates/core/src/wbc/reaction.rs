//! Relaxation QP that reconciles the acceleration command with the reaction
//! force reference under the floating-base dynamics, friction pyramid, and
//! time-varying normal-force bounds, followed by inverse-dynamics torque
//! extraction.

use thiserror::Error;

use crate::linalg::{DMat, DVec};
use crate::model::DynamicsTerms;
use crate::qp::{self, QpError, QpProblem};

/// Per-contact force constraint data: 4-face friction pyramid plus normal
/// bounds fz ∈ [fz_min, fz_max].
#[derive(Debug, Clone)]
pub struct ContactBound {
    pub friction_mu: f64,
    pub fz_min: f64,
    pub fz_max: f64,
}

/// Assembled QP inputs for one control tick.
#[derive(Debug, Clone)]
pub struct WbcQpProblem {
    /// Stacked 3-row point Jacobians of the active contacts.
    pub contact_jacobian: DMat,
    pub bounds: Vec<ContactBound>,
    /// Reaction-force relaxation weight (3·n_c × 3·n_c, PD).
    pub q1: DMat,
    /// Floating-base acceleration relaxation weight (6 × 6, PD).
    pub q2: DMat,
}

#[derive(Debug, Clone)]
pub struct WbcSolution {
    pub qdd: DVec,
    pub f_r: DVec,
    pub tau: DVec,
    pub delta_f: DVec,
    pub delta_fr: DVec,
    /// Active inequality rows at the optimum (per-contact row blocks of 6).
    pub active_set: Vec<usize>,
    pub objective: f64,
}

#[derive(Debug, Error)]
pub enum WbcQpError {
    #[error("reaction-force QP failed: {0}")]
    Solver(#[from] QpError),
    #[error("inconsistent dimensions: contact jacobian {rows}×{cols} with {bounds} bounds")]
    BadDimensions {
        rows: usize,
        cols: usize,
        bounds: usize,
    },
}

/// Rows of W for one contact, acting on (fx, fy, fz): W f ≥ w0.
fn pyramid_rows(b: &ContactBound) -> (DMat, DVec) {
    let mu = b.friction_mu;
    let w = DMat::from_row_slice(
        6,
        3,
        &[
            0.0, 0.0, 1.0, // fz ≥ fz_min
            0.0, 0.0, -1.0, // -fz ≥ -fz_max
            -1.0, 0.0, mu, // μ fz − fx ≥ 0
            1.0, 0.0, mu, // μ fz + fx ≥ 0
            0.0, -1.0, mu, // μ fz − fy ≥ 0
            0.0, 1.0, mu, // μ fz + fy ≥ 0
        ],
    );
    let w0 = DVec::from_column_slice(&[b.fz_min, -b.fz_max, 0.0, 0.0, 0.0, 0.0]);
    (w, w0)
}

/// Clamp a force into the pyramid/bounds of one contact.
fn project_force(f: &DVec, b: &ContactBound) -> DVec {
    let fz = f[2].clamp(b.fz_min, b.fz_max);
    let cap = b.friction_mu * fz;
    DVec::from_column_slice(&[f[0].clamp(-cap, cap), f[1].clamp(-cap, cap), fz])
}

/// Solve the relaxation QP.
///
/// Decision x = [δ_f (6); δ_fr (3·n_c)] with objective δ_frᵀQ1δ_fr + δ_fᵀQ2δ_f,
/// subject to the floating-base rows of A q̈ + b + g = J_cᵀ f_r with
/// q̈ = q̈_cmd + [δ_f; 0] and f_r = f_mpc + δ_fr, and W f_r ≥ w0.
/// Torques come from the actuated rows of the full dynamics at the optimum.
pub fn solve_wbc_qp(
    problem: &WbcQpProblem,
    dynamics: &DynamicsTerms,
    qdd_cmd: &DVec,
    f_mpc: &DVec,
) -> Result<WbcSolution, WbcQpError> {
    let nv = dynamics.a.nrows();
    let nc3 = problem.contact_jacobian.nrows();
    if nc3 != 3 * problem.bounds.len() || f_mpc.len() != nc3 {
        return Err(WbcQpError::BadDimensions {
            rows: nc3,
            cols: problem.contact_jacobian.ncols(),
            bounds: problem.bounds.len(),
        });
    }
    let nx = 6 + nc3;
    let s_f = &dynamics.s_f;

    // Objective ½ xᵀP x with P = 2·blockdiag(Q2, Q1).
    let mut p = DMat::zeros(nx, nx);
    p.view_mut((0, 0), (6, 6)).copy_from(&(2.0 * &problem.q2));
    if nc3 > 0 {
        p.view_mut((6, 6), (nc3, nc3))
            .copy_from(&(2.0 * &problem.q1));
    }

    // Equality: S_f A S_fᵀ δ_f − S_f J_cᵀ δ_fr = S_f (J_cᵀ f_mpc − A q̈_cmd − bias).
    let a_ff = s_f * &dynamics.a * s_f.transpose();
    let jc_t_f = s_f * problem.contact_jacobian.transpose();
    let mut eq_mat = DMat::zeros(6, nx);
    eq_mat.view_mut((0, 0), (6, 6)).copy_from(&a_ff);
    if nc3 > 0 {
        eq_mat.view_mut((0, 6), (6, nc3)).copy_from(&(-&jc_t_f));
    }
    let eq_rhs = if nc3 > 0 {
        &jc_t_f * f_mpc - s_f * (&dynamics.a * qdd_cmd + &dynamics.bias)
    } else {
        -(s_f * (&dynamics.a * qdd_cmd + &dynamics.bias))
    };

    // Inequalities act on δ_fr only: W(f_mpc + δ_fr) ≥ w0.
    let n_rows = 6 * problem.bounds.len();
    let mut ineq_mat = DMat::zeros(n_rows, nx);
    let mut ineq_rhs = DVec::zeros(n_rows);
    for (ci, b) in problem.bounds.iter().enumerate() {
        let (w, w0) = pyramid_rows(b);
        let f_ref = DVec::from(f_mpc.rows(3 * ci, 3));
        let shift = &w * &f_ref;
        for r in 0..6 {
            for c in 0..3 {
                ineq_mat[(6 * ci + r, 6 + 3 * ci + c)] = w[(r, c)];
            }
            ineq_rhs[6 * ci + r] = w0[r] - shift[r];
        }
    }

    let prob = QpProblem {
        p,
        q: DVec::zeros(nx),
        eq_mat,
        eq_rhs: eq_rhs.clone(),
        ineq_mat,
        ineq_rhs,
    };

    // Feasible start: project f_mpc into each contact's bounds, then solve the
    // SPD floating-base block for δ_f.
    let mut x0 = DVec::zeros(nx);
    for (ci, b) in problem.bounds.iter().enumerate() {
        let f_ref = DVec::from(f_mpc.rows(3 * ci, 3));
        let f_ok = project_force(&f_ref, b);
        for c in 0..3 {
            x0[6 + 3 * ci + c] = f_ok[c] - f_ref[c];
        }
    }
    let rhs0 = if nc3 > 0 {
        &eq_rhs + &jc_t_f * DVec::from(x0.rows(6, nc3))
    } else {
        eq_rhs.clone()
    };
    let delta_f0 = a_ff
        .clone()
        .cholesky()
        .expect("floating-base mass block must be SPD")
        .solve(&rhs0);
    for i in 0..6 {
        x0[i] = delta_f0[i];
    }

    let sol = qp::solve_from(&prob, &x0)?;

    let delta_f = DVec::from(sol.x.rows(0, 6));
    let delta_fr = DVec::from(sol.x.rows(6, nc3));
    let mut qdd = qdd_cmd.clone();
    for i in 0..6 {
        qdd[i] += delta_f[i];
    }
    let f_r = f_mpc + &delta_fr;
    let generalized = &dynamics.a * &qdd + &dynamics.bias
        - problem.contact_jacobian.transpose() * &f_r;
    let tau = &dynamics.s_a * generalized;
    let _ = nv;

    Ok(WbcSolution {
        qdd,
        f_r,
        tau,
        delta_f,
        delta_fr,
        active_set: sol.active_set,
        objective: sol.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biped;
    use crate::model::{build_model, Kinematics};

    fn standing_setup() -> (DynamicsTerms, DMat, Vec<ContactBound>) {
        let model = build_model(&biped::description()).unwrap();
        let state = biped::nominal_state(&model);
        let kin = Kinematics::compute(&model, &state);
        let dynamics = model.dynamics_terms(&kin, &state);
        let left = model.body_index("left_shank").unwrap();
        let right = model.body_index("right_shank").unwrap();
        let jl = model.point_jacobian(&kin, left, &biped::foot_offset());
        let jr = model.point_jacobian(&kin, right, &biped::foot_offset());
        let mut jc = DMat::zeros(6, model.nv());
        jc.view_mut((0, 0), (3, model.nv())).copy_from(&jl);
        jc.view_mut((3, 0), (3, model.nv())).copy_from(&jr);
        let bounds = vec![
            ContactBound {
                friction_mu: 0.7,
                fz_min: 0.0,
                fz_max: 200.0,
            },
            ContactBound {
                friction_mu: 0.7,
                fz_min: 0.0,
                fz_max: 200.0,
            },
        ];
        (dynamics, jc, bounds)
    }

    fn weights(nc3: usize) -> (DMat, DMat) {
        (DMat::identity(nc3, nc3), DMat::identity(6, 6) * 10.0)
    }

    #[test]
    fn consistent_command_needs_no_relaxation() {
        let (dynamics, jc, bounds) = standing_setup();
        let (q1, q2) = weights(6);
        // Forces solving the floating-base rows exactly at q̈ = 0: with a
        // consistent reference both relaxations vanish. Two point contacts
        // span only 5 of the 6 base directions, so solve by pseudo-inverse;
        // the CoM sits over the feet line, which keeps the system consistent.
        let lhs = &dynamics.s_f * jc.transpose();
        let rhs = &dynamics.s_f * &dynamics.bias;
        let f_mpc = crate::linalg::pinv(&lhs, 1e-10) * rhs;
        let problem = WbcQpProblem {
            contact_jacobian: jc,
            bounds,
            q1,
            q2,
        };
        let sol = solve_wbc_qp(&problem, &dynamics, &DVec::zeros(12), &f_mpc).unwrap();
        assert!(sol.delta_f.abs().max() < 1e-6, "delta_f {:?}", sol.delta_f);
        assert!(sol.delta_fr.abs().max() < 1e-6, "delta_fr {:?}", sol.delta_fr);
    }

    #[test]
    fn static_double_stance_carries_body_weight() {
        let (dynamics, jc, bounds) = standing_setup();
        let (q1, q2) = weights(6);
        // Even vertical split of the 5.4 kg weight across the feet.
        let f_mpc = DVec::from_column_slice(&[0.0, 0.0, 26.487, 0.0, 0.0, 26.487]);
        let problem = WbcQpProblem {
            contact_jacobian: jc,
            bounds,
            q1,
            q2: q2 * 1e6, // forbid cheating through base acceleration
        };
        let sol = solve_wbc_qp(&problem, &dynamics, &DVec::zeros(12), &f_mpc).unwrap();
        let total_vertical = sol.f_r[2] + sol.f_r[5];
        assert!(
            (total_vertical - 52.97).abs() < 0.05,
            "total vertical force {total_vertical}"
        );
    }

    #[test]
    fn floating_base_dynamics_hold_at_optimum() {
        let (dynamics, jc, bounds) = standing_setup();
        let (q1, q2) = weights(6);
        let f_mpc = DVec::from_column_slice(&[1.0, -2.0, 20.0, 0.5, 1.5, 30.0]);
        let qdd_cmd = DVec::from_fn(12, |i, _| 0.1 * (i as f64) - 0.5);
        let problem = WbcQpProblem {
            contact_jacobian: jc.clone(),
            bounds,
            q1,
            q2,
        };
        let sol = solve_wbc_qp(&problem, &dynamics, &qdd_cmd, &f_mpc).unwrap();
        let residual = (&dynamics.s_f
            * (&dynamics.a * &sol.qdd + &dynamics.bias - jc.transpose() * &sol.f_r))
            .abs()
            .max();
        assert!(residual < 1e-6, "floating-base residual {residual}");
        // Friction pyramid satisfied.
        for ci in 0..2 {
            let f = sol.f_r.rows(3 * ci, 3);
            assert!(f[2] >= -1e-9);
            assert!(f[0].abs() <= 0.7 * f[2] + 1e-9);
            assert!(f[1].abs() <= 0.7 * f[2] + 1e-9);
        }
        // Inverse dynamics closes: actuated rows reproduce tau, floating rows zero.
        let gen = &dynamics.a * &sol.qdd + &dynamics.bias - jc.transpose() * &sol.f_r;
        assert!((&dynamics.s_a * &gen - &sol.tau).abs().max() < 1e-10);
    }

    #[test]
    fn no_contact_flight_phase_solves() {
        let model = build_model(&biped::description()).unwrap();
        let state = biped::nominal_state(&model);
        let kin = Kinematics::compute(&model, &state);
        let dynamics = model.dynamics_terms(&kin, &state);
        let problem = WbcQpProblem {
            contact_jacobian: DMat::zeros(0, 12),
            bounds: vec![],
            q1: DMat::zeros(0, 0),
            q2: DMat::identity(6, 6),
        };
        let sol = solve_wbc_qp(&problem, &dynamics, &DVec::zeros(12), &DVec::zeros(0)).unwrap();
        // Unforced base: floating rows of the dynamics must balance.
        let residual = (&dynamics.s_f * (&dynamics.a * &sol.qdd + &dynamics.bias))
            .abs()
            .max();
        assert!(residual < 1e-8);
    }
}
