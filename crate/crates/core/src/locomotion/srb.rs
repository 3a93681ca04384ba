//! Reaction-force reference generation: a single convex QP over one gait
//! period of linearized single-rigid-body (CoM) dynamics, with friction
//! pyramids and the transition force bounds, plus a static weight-split
//! fallback.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::gait::Side;
use crate::linalg::{skew, DMat, DVec};
use crate::qp::{self, QpProblem};

pub const GRAVITY_VEC: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrbParams {
    /// Discretization step, s.
    pub dt: f64,
    /// Number of knots in the horizon (dt · steps = one gait period).
    pub horizon_steps: usize,
    pub w_pos_xy: f64,
    pub w_pos_z: f64,
    pub w_vel: f64,
    pub w_force: f64,
    pub w_moment: f64,
    /// Extra weight on the last knot's tracking terms; counters the
    /// free-tail sag of a finite horizon.
    pub terminal_boost: f64,
    pub friction_mu: f64,
    /// Hard cap on a single foot's normal force, N.
    pub fz_max: f64,
}

impl Default for SrbParams {
    fn default() -> Self {
        SrbParams {
            dt: 0.030,
            horizon_steps: 20,
            w_pos_xy: 2e3,
            w_pos_z: 2e4,
            w_vel: 1e2,
            w_force: 1e-4,
            w_moment: 1e-1,
            terminal_boost: 25.0,
            friction_mu: 0.7,
            fz_max: 140.0,
        }
    }
}

/// One scheduled stance foot at a horizon knot.
#[derive(Debug, Clone)]
pub struct ScheduledContact {
    pub side: Side,
    pub position: Vector3<f64>,
    /// Normal-force bound scalar from the gait transitions, in [0, 1].
    pub ramp: f64,
}

/// Planned forces per knot, tagged by foot.
#[derive(Debug, Clone)]
pub struct SrbPlan {
    pub knots: Vec<Vec<(Side, Vector3<f64>)>>,
    /// True when the QP failed and the static fallback was used.
    pub fallback: bool,
}

impl SrbPlan {
    /// Force for `side` at the first knot, if scheduled.
    pub fn first_force(&self, side: Side) -> Option<Vector3<f64>> {
        self.knots
            .first()?
            .iter()
            .find(|(s, _)| *s == side)
            .map(|(_, f)| *f)
    }
}

/// Static split of the weight vector among the contacts, weighted by inverse
/// horizontal distance to the CoM projection and clipped to the ramp caps.
pub fn static_split(
    mass: f64,
    com: &Vector3<f64>,
    contacts: &[ScheduledContact],
    params: &SrbParams,
) -> Vec<(Side, Vector3<f64>)> {
    if contacts.is_empty() {
        return Vec::new();
    }
    let weight = mass * 9.81;
    let mut w: Vec<f64> = contacts
        .iter()
        .map(|c| {
            let d = (Vector2::new(c.position.x, c.position.y) - Vector2::new(com.x, com.y)).norm();
            1.0 / d.max(0.01)
        })
        .collect();
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    // One redistribution pass for saturated feet.
    let mut forces: Vec<f64> = contacts
        .iter()
        .zip(&w)
        .map(|(c, wi)| (weight * wi).min(c.ramp * params.fz_max))
        .collect();
    let assigned: f64 = forces.iter().sum();
    let deficit = weight - assigned;
    if deficit > 0.0 {
        let headroom: Vec<f64> = contacts
            .iter()
            .zip(&forces)
            .map(|(c, f)| (c.ramp * params.fz_max - f).max(0.0))
            .collect();
        let total_head: f64 = headroom.iter().sum();
        if total_head > 1e-9 {
            for (f, h) in forces.iter_mut().zip(&headroom) {
                *f += deficit * h / total_head;
            }
        }
    }
    contacts
        .iter()
        .zip(forces)
        .map(|(c, fz)| (c.side, Vector3::new(0.0, 0.0, fz)))
        .collect()
}

struct QpLayout {
    /// (knot, contact index within knot) → column offset of that force.
    offsets: Vec<Vec<usize>>,
}

fn build_qp(
    mass: f64,
    com: &Vector3<f64>,
    com_vel: &Vector3<f64>,
    com_ref: &[Vector3<f64>],
    schedule: &[Vec<ScheduledContact>],
    params: &SrbParams,
) -> (QpProblem, DVec, QpLayout) {
    let k_steps = schedule.len();
    let dt = params.dt;

    let mut offsets = Vec::with_capacity(k_steps);
    let mut n_vars = 0;
    for knot in schedule {
        let mut per = Vec::with_capacity(knot.len());
        for _ in knot {
            per.push(n_vars);
            n_vars += 3;
        }
        offsets.push(per);
    }

    let mut p = DMat::zeros(n_vars, n_vars);
    let mut q = DVec::zeros(n_vars);

    // Force regularization.
    for i in 0..n_vars {
        p[(i, i)] += 2.0 * params.w_force;
    }

    // Rollout maps: c_k and v_k are affine in the stacked forces.
    // v_k = v0 + k·dt·g + (dt/m)·Σ_{i<k} F_i
    // c_k = c0 + k·dt·v0 + (k(k+1)/2)·dt²·g + (dt²/m)·Σ_{i<k} (k−i)·F_i
    let add_quadratic = |p: &mut DMat, q: &mut DVec, row_map: &DMat, offset: &Vector3<f64>, target: &Vector3<f64>, weight: &Vector3<f64>| {
        for axis in 0..3 {
            let w = weight[axis];
            if w == 0.0 {
                continue;
            }
            let row = row_map.row(axis);
            let err0 = offset[axis] - target[axis];
            for a in 0..n_vars {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                q[a] += 2.0 * w * ra * err0;
                for b in 0..n_vars {
                    let rb = row[b];
                    if rb != 0.0 {
                        p[(a, b)] += 2.0 * w * ra * rb;
                    }
                }
            }
        }
    };

    for k in 1..=k_steps {
        let kf = k as f64;
        // Position rows.
        let mut c_map = DMat::zeros(3, n_vars);
        let mut v_map = DMat::zeros(3, n_vars);
        for i in 0..k {
            let gain_c = dt * dt / mass * (kf - i as f64);
            let gain_v = dt / mass;
            for (ci, _) in schedule[i].iter().enumerate() {
                let off = offsets[i][ci];
                for axis in 0..3 {
                    c_map[(axis, off + axis)] += gain_c;
                    v_map[(axis, off + axis)] += gain_v;
                }
            }
        }
        let c_offset = com + kf * dt * com_vel + (kf * (kf + 1.0) / 2.0) * dt * dt * GRAVITY_VEC;
        let v_offset = com_vel + kf * dt * GRAVITY_VEC;
        let c_ref = com_ref[k - 1];
        let boost = if k == k_steps {
            params.terminal_boost
        } else {
            1.0
        };
        add_quadratic(
            &mut p,
            &mut q,
            &c_map,
            &c_offset,
            &c_ref,
            &(boost * Vector3::new(params.w_pos_xy, params.w_pos_xy, params.w_pos_z)),
        );
        add_quadratic(
            &mut p,
            &mut q,
            &v_map,
            &v_offset,
            &Vector3::zeros(),
            &(boost * Vector3::new(params.w_vel, params.w_vel, params.w_vel)),
        );

        // Moment about the reference CoM at this knot.
        if params.w_moment > 0.0 && !schedule[k - 1].is_empty() {
            let mut m_map = DMat::zeros(3, n_vars);
            for (ci, c) in schedule[k - 1].iter().enumerate() {
                let lever = skew(&(c.position - c_ref));
                let off = offsets[k - 1][ci];
                for r in 0..3 {
                    for cidx in 0..3 {
                        m_map[(r, off + cidx)] += lever[(r, cidx)];
                    }
                }
            }
            add_quadratic(
                &mut p,
                &mut q,
                &m_map,
                &Vector3::zeros(),
                &Vector3::zeros(),
                &Vector3::new(params.w_moment, params.w_moment, params.w_moment),
            );
        }
    }

    // Pyramid + normal bounds per contact per knot.
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (k, knot) in schedule.iter().enumerate() {
        for (ci, c) in knot.iter().enumerate() {
            let off = offsets[k][ci];
            let mu = params.friction_mu;
            let cap = c.ramp * params.fz_max;
            let mut push = |fx: f64, fy: f64, fz: f64, b: f64| {
                let mut row = vec![0.0; n_vars];
                row[off] = fx;
                row[off + 1] = fy;
                row[off + 2] = fz;
                rows.push(row);
                rhs.push(b);
            };
            push(0.0, 0.0, 1.0, 0.0); // fz ≥ 0
            push(0.0, 0.0, -1.0, -cap); // fz ≤ cap
            push(-1.0, 0.0, mu, 0.0);
            push(1.0, 0.0, mu, 0.0);
            push(0.0, -1.0, mu, 0.0);
            push(0.0, 1.0, mu, 0.0);
        }
    }
    let n_rows = rows.len();
    let mut ineq_mat = DMat::zeros(n_rows, n_vars);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            ineq_mat[(r, c)] = *v;
        }
    }

    // Feasible start: static vertical split at every knot.
    let mut x0 = DVec::zeros(n_vars);
    for (k, knot) in schedule.iter().enumerate() {
        let split = static_split(mass, com, knot, params);
        for (ci, (_, f)) in split.iter().enumerate() {
            let off = offsets[k][ci];
            x0[off + 2] = f.z;
        }
    }

    (
        QpProblem {
            p,
            q,
            eq_mat: DMat::zeros(0, n_vars),
            eq_rhs: DVec::zeros(0),
            ineq_mat,
            ineq_rhs: DVec::from_vec(rhs),
        },
        x0,
        QpLayout { offsets },
    )
}

/// Plan reaction forces over the horizon. Contacts whose ramp cap is
/// negligible should be omitted from the schedule by the caller.
pub fn srb_reaction_forces(
    mass: f64,
    com: &Vector3<f64>,
    com_vel: &Vector3<f64>,
    com_ref: &[Vector3<f64>],
    schedule: &[Vec<ScheduledContact>],
    params: &SrbParams,
) -> SrbPlan {
    assert_eq!(com_ref.len(), schedule.len(), "one reference per knot");
    if schedule.is_empty() {
        return SrbPlan {
            knots: Vec::new(),
            fallback: false,
        };
    }
    let (prob, x0, layout) = build_qp(mass, com, com_vel, com_ref, schedule, params);
    match qp::solve_from(&prob, &x0) {
        Ok(sol) => {
            let mut knots = Vec::with_capacity(schedule.len());
            for (k, knot) in schedule.iter().enumerate() {
                let forces = knot
                    .iter()
                    .enumerate()
                    .map(|(ci, c)| {
                        let off = layout.offsets[k][ci];
                        (
                            c.side,
                            Vector3::new(sol.x[off], sol.x[off + 1], sol.x[off + 2]),
                        )
                    })
                    .collect();
                knots.push(forces);
            }
            SrbPlan {
                knots,
                fallback: false,
            }
        }
        Err(_) => SrbPlan {
            knots: schedule
                .iter()
                .map(|knot| static_split(mass, com, knot, params))
                .collect(),
            fallback: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both_feet(ramp: f64) -> Vec<ScheduledContact> {
        vec![
            ScheduledContact {
                side: Side::Left,
                position: Vector3::new(0.0, 0.07, 0.0),
                ramp,
            },
            ScheduledContact {
                side: Side::Right,
                position: Vector3::new(0.0, -0.07, 0.0),
                ramp,
            },
        ]
    }

    fn average_total_vertical(plan: &SrbPlan) -> f64 {
        let sum: f64 = plan
            .knots
            .iter()
            .map(|knot| knot.iter().map(|(_, f)| f.z).sum::<f64>())
            .sum();
        sum / plan.knots.len() as f64
    }

    #[test]
    fn symmetric_double_stance_splits_weight_evenly() {
        let params = SrbParams::default();
        let com = Vector3::new(0.0, 0.0, 0.45);
        let k = params.horizon_steps;
        let schedule: Vec<_> = (0..k).map(|_| both_feet(1.0)).collect();
        let com_ref = vec![com; k];
        let plan = srb_reaction_forces(5.4, &com, &Vector3::zeros(), &com_ref, &schedule, &params);
        assert!(!plan.fallback);
        // Left/right symmetry is exact at every knot; the impulse balance
        // pins the average total vertical force to the weight, and each
        // foot's average to half of it: 26.49 N.
        let mut left_avg = 0.0;
        for knot in &plan.knots {
            let fl = knot.iter().find(|(s, _)| *s == Side::Left).unwrap().1;
            let fr = knot.iter().find(|(s, _)| *s == Side::Right).unwrap().1;
            assert!((fl.z - fr.z).abs() < 1e-6);
            assert!(fl.xy().norm() < 1e-6, "tangential force {fl:?}");
            left_avg += fl.z;
        }
        left_avg /= plan.knots.len() as f64;
        assert!((left_avg - 26.487).abs() < 0.1, "left avg fz {left_avg}");
        assert!(
            (average_total_vertical(&plan) - 52.974).abs() < 0.2,
            "avg total {}",
            average_total_vertical(&plan)
        );
        // The first knot feeds the whole-body QP: it must stay within a few
        // percent of the static split.
        let fl0 = plan.first_force(Side::Left).unwrap();
        assert!((fl0.z - 26.487).abs() < 1.5, "first knot fz {}", fl0.z);
    }

    #[test]
    fn single_stance_carries_full_weight() {
        let params = SrbParams::default();
        let com = Vector3::new(0.0, 0.07, 0.45); // over the left foot
        let k = params.horizon_steps;
        let schedule: Vec<_> = (0..k)
            .map(|_| {
                vec![ScheduledContact {
                    side: Side::Left,
                    position: Vector3::new(0.0, 0.07, 0.0),
                    ramp: 1.0,
                }]
            })
            .collect();
        let com_ref = vec![com; k];
        let plan = srb_reaction_forces(5.4, &com, &Vector3::zeros(), &com_ref, &schedule, &params);
        let avg = average_total_vertical(&plan);
        assert!((avg - 52.97).abs() < 0.2, "avg fz {avg}");
    }

    /// Exhaustive active-set enumeration on the assembled QP: independent
    /// check of the one-knot lateral-offset distribution.
    #[test]
    fn lateral_offset_matches_enumeration_oracle() {
        let params = SrbParams {
            horizon_steps: 1,
            ..SrbParams::default()
        };
        let com = Vector3::new(0.0, 0.03, 0.45);
        let schedule = vec![both_feet(1.0)];
        let com_ref = vec![com];
        let (prob, x0, _) = build_qp(5.4, &com, &Vector3::zeros(), &com_ref, &schedule, &params);
        let sol = qp::solve_from(&prob, &x0).unwrap();

        let mi = prob.ineq_mat.nrows();
        let mut best = f64::INFINITY;
        for mask in 0..(1u32 << mi) {
            let working: Vec<usize> = (0..mi).filter(|i| mask & (1 << i) != 0).collect();
            // Equality-KKT on the working set.
            let n = prob.p.nrows();
            let mw = working.len();
            let mut kkt = DMat::zeros(n + mw, n + mw);
            kkt.view_mut((0, 0), (n, n)).copy_from(&prob.p);
            for (j, &row) in working.iter().enumerate() {
                for c in 0..n {
                    kkt[(n + j, c)] = prob.ineq_mat[(row, c)];
                    kkt[(c, n + j)] = prob.ineq_mat[(row, c)];
                }
            }
            let mut rhs = DVec::zeros(n + mw);
            for c in 0..n {
                rhs[c] = -prob.q[c];
            }
            for (j, &row) in working.iter().enumerate() {
                rhs[n + j] = prob.ineq_rhs[row];
            }
            let Some(sol_kkt) = kkt.full_piv_lu().solve(&rhs) else {
                continue;
            };
            let x = DVec::from(sol_kkt.rows(0, n));
            if working.iter().enumerate().any(|(j, _)| -sol_kkt[n + j] < -1e-8) {
                continue;
            }
            if prob.max_violation(&x) > 1e-8 {
                continue;
            }
            best = best.min(prob.objective(&x));
        }
        assert!(
            (sol.objective - best).abs() <= 1e-6 * (1.0 + best.abs()),
            "objective {} vs oracle {}",
            sol.objective,
            best
        );
        // The foot closer to the CoM carries more load.
        let fl = DVec::from(sol.x.rows(0, 3));
        let fr = DVec::from(sol.x.rows(3, 3));
        assert!(fl[2] > fr[2]);
    }

    #[test]
    fn transition_cap_limits_normal_force() {
        let params = SrbParams {
            horizon_steps: 6,
            ..SrbParams::default()
        };
        let com = Vector3::new(0.0, 0.0, 0.45);
        let schedule: Vec<_> = (0..6)
            .map(|_| {
                let mut knot = both_feet(1.0);
                knot[1].ramp = 0.1; // right foot nearly unloaded
                knot
            })
            .collect();
        let com_ref = vec![com; 6];
        let plan = srb_reaction_forces(5.4, &com, &Vector3::zeros(), &com_ref, &schedule, &params);
        for knot in &plan.knots {
            let fr = knot.iter().find(|(s, _)| *s == Side::Right).unwrap().1;
            assert!(fr.z <= 0.1 * params.fz_max + 1e-8);
        }
        let avg = average_total_vertical(&plan);
        assert!((avg - 52.974).abs() < 1.0, "avg total {avg}");
    }

    #[test]
    fn static_split_favors_near_foot_and_respects_caps() {
        let params = SrbParams::default();
        let com = Vector3::new(0.0, 0.05, 0.45);
        let split = static_split(5.4, &com, &both_feet(1.0), &params);
        let (_, fl) = split[0];
        let (_, fr) = split[1];
        assert!(fl.z > fr.z);
        assert!((fl.z + fr.z - 52.974).abs() < 1e-9);
    }
}
