//! Minimum-jerk swing trajectories: quintic per horizontal axis, two chained
//! quintics through the apex on the vertical axis.

use nalgebra::Vector3;

/// Quintic polynomial on [t0, tf] in normalized time; evaluation clamps to
/// the endpoint values outside the interval.
#[derive(Debug, Clone)]
pub struct Quintic {
    c: [f64; 6],
    t0: f64,
    tf: f64,
}

impl Quintic {
    /// Fit boundary position/velocity/acceleration at both ends.
    pub fn fit(
        t0: f64,
        tf: f64,
        (p0, v0, a0): (f64, f64, f64),
        (pf, vf, af): (f64, f64, f64),
    ) -> Quintic {
        assert!(tf > t0, "quintic needs t0 < tf");
        let t = tf - t0;
        let (v0, a0, vf, af) = (v0 * t, a0 * t * t, vf * t, af * t * t);
        let d = pf - p0;
        let r1 = d - v0 - a0 / 2.0;
        let r2 = vf - v0 - a0;
        let r3 = af - a0;
        Quintic {
            c: [
                p0,
                v0,
                a0 / 2.0,
                10.0 * r1 - 4.0 * r2 + r3 / 2.0,
                -15.0 * r1 + 7.0 * r2 - r3,
                6.0 * r1 - 3.0 * r2 + r3 / 2.0,
            ],
            t0,
            tf,
        }
    }

    pub fn coefficients(&self) -> &[f64; 6] {
        &self.c
    }

    /// (position, velocity, acceleration) at `t`, clamped to [t0, tf].
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let t_span = self.tf - self.t0;
        let s = ((t - self.t0) / t_span).clamp(0.0, 1.0);
        let c = &self.c;
        let p = c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
        let dp = c[1] + s * (2.0 * c[2] + s * (3.0 * c[3] + s * (4.0 * c[4] + s * 5.0 * c[5])));
        let ddp = 2.0 * c[2] + s * (6.0 * c[3] + s * (12.0 * c[4] + s * 20.0 * c[5]));
        (p, dp / t_span, ddp / (t_span * t_span))
    }
}

/// Swing-foot reference: minimum-jerk horizontal axes plus a vertical bell
/// through the apex at mid-swing.
#[derive(Debug, Clone)]
pub struct SwingTrajectory {
    x: Quintic,
    y: Quintic,
    z_up: Quintic,
    z_down: Quintic,
    t_mid: f64,
    pub t0: f64,
    pub tf: f64,
    pub target: Vector3<f64>,
}

impl SwingTrajectory {
    /// Plan from rest at `p0` to rest at `pf`.
    pub fn new(t0: f64, tf: f64, p0: Vector3<f64>, pf: Vector3<f64>, apex: f64) -> SwingTrajectory {
        Self::refit(
            t0,
            tf,
            (p0, Vector3::zeros(), Vector3::zeros()),
            pf,
            apex,
        )
    }

    /// Re-plan mid-flight from the current foot state towards a new target,
    /// keeping position/velocity/acceleration continuity at `t0`.
    pub fn refit(
        t0: f64,
        tf: f64,
        (p0, v0, a0): (Vector3<f64>, Vector3<f64>, Vector3<f64>),
        pf: Vector3<f64>,
        apex: f64,
    ) -> SwingTrajectory {
        let t_mid = 0.5 * (t0 + tf);
        // Mid-swing refits land inside the second half: degenerate up-segment
        // spans are avoided by planning the remaining descent only.
        let (z_up, z_down) = if t_mid > t0 + 1e-6 {
            let apex_z = apex.max(p0.z).max(pf.z);
            (
                Quintic::fit(t0, t_mid, (p0.z, v0.z, a0.z), (apex_z, 0.0, 0.0)),
                Quintic::fit(t_mid, tf, (apex_z, 0.0, 0.0), (pf.z, 0.0, 0.0)),
            )
        } else {
            let descend = Quintic::fit(t0, tf, (p0.z, v0.z, a0.z), (pf.z, 0.0, 0.0));
            (descend.clone(), descend)
        };
        SwingTrajectory {
            x: Quintic::fit(t0, tf, (p0.x, v0.x, a0.x), (pf.x, 0.0, 0.0)),
            y: Quintic::fit(t0, tf, (p0.y, v0.y, a0.y), (pf.y, 0.0, 0.0)),
            z_up,
            z_down,
            t_mid,
            t0,
            tf,
            target: pf,
        }
    }

    pub fn eval(&self, t: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let (px, vx, ax) = self.x.eval(t);
        let (py, vy, ay) = self.y.eval(t);
        let (pz, vz, az) = if t < self.t_mid {
            self.z_up.eval(t)
        } else {
            self.z_down.eval(t)
        };
        (
            Vector3::new(px, py, pz),
            Vector3::new(vx, vy, vz),
            Vector3::new(ax, ay, az),
        )
    }
}

/// Minimum-jerk interpolation between rest states with a vertical apex at
/// mid-swing; `t` outside [t0, tf] clamps to the endpoint values.
pub fn min_jerk(
    t: f64,
    t0: f64,
    tf: f64,
    p0: Vector3<f64>,
    pf: Vector3<f64>,
    apex: f64,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    SwingTrajectory::new(t0, tf, p0, pf, apex).eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_conditions_exact() {
        let p0 = Vector3::new(0.1, -0.2, 0.0);
        let pf = Vector3::new(0.3, 0.1, 0.0);
        let (p, v, a) = min_jerk(0.0, 0.0, 0.4, p0, pf, 0.05);
        assert!((p - p0).norm() < 1e-12);
        assert!(v.norm() < 1e-12);
        assert!(a.norm() < 1e-12);
        let (p, v, a) = min_jerk(0.4, 0.0, 0.4, p0, pf, 0.05);
        assert!((p - pf).norm() < 1e-12);
        assert!(v.norm() < 1e-12);
        assert!(a.norm() < 1e-12);
    }

    #[test]
    fn clamps_outside_interval() {
        let p0 = Vector3::new(0.0, 0.0, 0.0);
        let pf = Vector3::new(0.2, 0.0, 0.0);
        let before = min_jerk(-1.0, 0.0, 0.4, p0, pf, 0.05);
        let after = min_jerk(9.0, 0.0, 0.4, p0, pf, 0.05);
        assert!((before.0 - p0).norm() < 1e-12);
        assert!((after.0 - pf).norm() < 1e-12);
        assert!(before.1.norm() < 1e-12);
        assert!(after.1.norm() < 1e-12);
    }

    #[test]
    fn planar_midpoint_symmetry() {
        let p0 = Vector3::new(-0.1, 0.04, 0.0);
        let pf = Vector3::new(0.25, -0.08, 0.0);
        let (p, _, _) = min_jerk(0.2, 0.0, 0.4, p0, pf, 0.05);
        assert!((p.x - 0.5 * (p0.x + pf.x)).abs() < 1e-12);
        assert!((p.y - 0.5 * (p0.y + pf.y)).abs() < 1e-12);
    }

    #[test]
    fn vertical_apex_at_mid_swing() {
        let p0 = Vector3::zeros();
        let pf = Vector3::new(0.2, 0.1, 0.0);
        let apex = 0.07;
        let (p, v, _) = min_jerk(0.2, 0.0, 0.4, p0, pf, apex);
        assert!((p.z - apex).abs() < 1e-12);
        assert!(v.z.abs() < 1e-12);
        // Apex is the maximum height along the trajectory.
        for i in 0..=40 {
            let t = i as f64 * 0.01;
            let (pt, _, _) = min_jerk(t, 0.0, 0.4, p0, pf, apex);
            assert!(pt.z <= apex + 1e-12);
        }
    }

    #[test]
    fn rest_to_rest_coefficients_match_canonical_min_jerk() {
        // The jerk-optimal rest-to-rest profile is p0 + Δ(10s³ − 15s⁴ + 6s⁵).
        let q = Quintic::fit(0.0, 1.0, (2.0, 0.0, 0.0), (5.0, 0.0, 0.0));
        let d = 3.0;
        let expect = [2.0, 0.0, 0.0, 10.0 * d, -15.0 * d, 6.0 * d];
        for (got, want) in q.coefficients().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn quintic_general_boundaries() {
        let q = Quintic::fit(0.1, 0.5, (0.2, -0.3, 1.0), (0.6, 0.4, -2.0));
        let (p, v, a) = q.eval(0.1);
        assert!((p - 0.2).abs() < 1e-12 && (v + 0.3).abs() < 1e-12 && (a - 1.0).abs() < 1e-10);
        let (p, v, a) = q.eval(0.5);
        assert!((p - 0.6).abs() < 1e-12 && (v - 0.4).abs() < 1e-12 && (a + 2.0).abs() < 1e-10);
    }

    #[test]
    fn refit_is_continuous_at_replan_time() {
        let traj = SwingTrajectory::new(
            0.0,
            0.4,
            Vector3::zeros(),
            Vector3::new(0.2, -0.1, 0.0),
            0.05,
        );
        let t_replan = 0.2;
        let state = traj.eval(t_replan);
        let new_target = Vector3::new(0.1, 0.15, 0.0);
        let refit = SwingTrajectory::refit(t_replan, 0.4, state, new_target, 0.05);
        let after = refit.eval(t_replan);
        assert!((after.0 - state.0).norm() < 1e-10);
        assert!((after.1 - state.1).norm() < 1e-10);
        assert!((after.2 - state.2).norm() < 1e-9);
        let (end, vend, _) = refit.eval(0.4);
        assert!((end - new_target).norm() < 1e-10);
        assert!(vend.norm() < 1e-10);
    }
}
