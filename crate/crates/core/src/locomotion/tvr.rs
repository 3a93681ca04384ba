//! Velocity-reversal foot-step planning on the linear inverted pendulum, and
//! the stepping-region clamp that distinguishes the restricted baseline from
//! the extended strategy.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::gait::Side;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TvrParams {
    /// Nominal CoM height, m.
    pub com_height: f64,
    /// Velocity feedback gain, s. Values above 1/ω = √(h/g) make the
    /// inverted-pendulum velocity reverse after touchdown.
    pub kappa: f64,
    /// Lateral offset of the step from the CoM towards the swing side, m.
    pub lateral_bias: f64,
}

impl TvrParams {
    /// Gain that reverses the LIPM velocity `t_r` seconds after touchdown:
    /// κ = coth(ω t_r)/ω.
    pub fn with_reversal_time(com_height: f64, t_r: f64, lateral_bias: f64) -> TvrParams {
        let omega = (GRAVITY / com_height).sqrt();
        let x = omega * t_r;
        TvrParams {
            com_height,
            kappa: x.cosh() / x.sinh() / omega,
            lateral_bias,
        }
    }

    pub fn omega(&self) -> f64 {
        (GRAVITY / self.com_height).sqrt()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.com_height > 0.0) {
            return Err(format!("com_height must be > 0, got {}", self.com_height));
        }
        if !(self.kappa > 0.0) {
            return Err(format!("kappa must be > 0, got {}", self.kappa));
        }
        Ok(())
    }
}

impl Default for TvrParams {
    fn default() -> Self {
        TvrParams::with_reversal_time(0.45, 0.33, 0.07)
    }
}

/// Ground-plane step target for the given swing foot:
/// p = com + κ·v + lateral bias towards the swing side.
pub fn tvr_plan(
    com_pos: &Vector3<f64>,
    com_vel: &Vector3<f64>,
    swing_side: Side,
    params: &TvrParams,
) -> Vector2<f64> {
    Vector2::new(
        com_pos.x + params.kappa * com_vel.x,
        com_pos.y + params.kappa * com_vel.y + swing_side.sign() * params.lateral_bias,
    )
}

/// Closed-form LIPM propagation of the CoM state about a stance foot:
/// x(t) − p = (x₀ − p)·cosh(ωt) + (v₀/ω)·sinh(ωt).
pub fn lipm_predict(
    com_pos: &Vector3<f64>,
    com_vel: &Vector3<f64>,
    stance_xy: &Vector2<f64>,
    omega: f64,
    t: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let (ch, sh) = ((omega * t).cosh(), (omega * t).sinh());
    let mut pos = *com_pos;
    let mut vel = *com_vel;
    for axis in 0..2 {
        let x0 = com_pos[axis] - stance_xy[axis];
        let v0 = com_vel[axis];
        pos[axis] = stance_xy[axis] + x0 * ch + v0 / omega * sh;
        vel[axis] = omega * x0 * sh + v0 * ch;
    }
    (pos, vel)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMode {
    /// Lateral bound stops short of the stance leg: no crossing.
    BaselineRestricted,
    /// Kinematic reachability box: crossing steps allowed.
    ProposedExtended,
}

/// Stepping-region box relative to the stance foot. Lateral coordinates are
/// measured inward, from the stance foot towards (and past) the body midline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRegion {
    pub mode: RegionMode,
    /// Sagittal reach around the stance foot, m.
    pub sagittal: f64,
    /// Inward lateral limit in baseline mode: the swing foot keeps at least
    /// this gap on its own side of the stance foot (≥ 0 forbids crossing).
    pub baseline_inner_gap: f64,
    /// Inward lateral limit in extended mode: how far past the stance foot a
    /// crossing step may reach, m.
    pub extended_crossing: f64,
    /// Outward lateral reach, m.
    pub outward: f64,
}

impl Default for StepRegion {
    fn default() -> Self {
        StepRegion {
            mode: RegionMode::ProposedExtended,
            sagittal: 0.22,
            baseline_inner_gap: 0.04,
            extended_crossing: 0.14,
            outward: 0.26,
        }
    }
}

impl StepRegion {
    pub fn with_mode(&self, mode: RegionMode) -> StepRegion {
        StepRegion {
            mode,
            ..self.clone()
        }
    }

    /// Componentwise projection of a ground-plane target onto the region box
    /// around `stance_pos` for a swing foot on `swing_side`.
    pub fn clamp_step(
        &self,
        target: &Vector2<f64>,
        stance_pos: &Vector2<f64>,
        swing_side: Side,
    ) -> Vector2<f64> {
        let x = target
            .x
            .clamp(stance_pos.x - self.sagittal, stance_pos.x + self.sagittal);
        // Inward direction points from the swing side towards the stance leg:
        // the opposite of the swing side's own sign.
        let inward = -swing_side.sign();
        let u = (target.y - stance_pos.y) * inward;
        let u_max = match self.mode {
            RegionMode::BaselineRestricted => -self.baseline_inner_gap,
            RegionMode::ProposedExtended => self.extended_crossing,
        };
        let u_clamped = u.clamp(-self.outward, u_max);
        Vector2::new(x, stance_pos.y + inward * u_clamped)
    }

    /// True when the target lies inside the region box.
    pub fn contains(&self, target: &Vector2<f64>, stance_pos: &Vector2<f64>, side: Side) -> bool {
        (self.clamp_step(target, stance_pos, side) - target).norm() < 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_velocity_steps_at_mirrored_offset() {
        let params = TvrParams::default();
        let com = Vector3::new(0.0, 0.07, 0.45); // over the left stance foot
        let target = tvr_plan(&com, &Vector3::zeros(), Side::Right, &params);
        assert!((target.x - 0.0).abs() < 1e-12);
        assert!((target.y - (0.07 - params.lateral_bias)).abs() < 1e-12);
    }

    #[test]
    fn target_shifts_proportionally_with_velocity() {
        let params = TvrParams::default();
        let com = Vector3::new(0.0, 0.0, 0.45);
        let v = Vector3::new(0.0, -0.8, 0.0);
        let still = tvr_plan(&com, &Vector3::zeros(), Side::Right, &params);
        let moving = tvr_plan(&com, &v, Side::Right, &params);
        assert!((moving.y - still.y - params.kappa * v.y).abs() < 1e-12);
    }

    #[test]
    fn planned_step_reverses_lipm_velocity() {
        // Closed-form LIPM rollout about the planned foothold: the CoM
        // velocity must cross zero near the configured reversal time.
        let t_r = 0.33;
        let params = TvrParams::with_reversal_time(0.45, t_r, 0.0);
        let omega = params.omega();
        for v0 in [0.15, 0.4, 0.9] {
            let com = Vector3::new(0.0, 0.0, params.com_height);
            let vel = Vector3::new(0.0, v0, 0.0);
            let p = tvr_plan(&com, &vel, Side::Right, &params).y;
            let x0 = com.y - p;
            let v_at = |t: f64| omega * x0 * (omega * t).sinh() + v0 * (omega * t).cosh();
            assert!(v_at(0.0) > 0.0);
            assert!(
                v_at(t_r).abs() < 1e-9 * (1.0 + v0),
                "velocity at reversal time: {}",
                v_at(t_r)
            );
            assert!(v_at(t_r + 0.05) < 0.0);
        }
    }

    #[test]
    fn lipm_prediction_matches_numerical_integration() {
        let omega = (GRAVITY / 0.45_f64).sqrt();
        let stance = Vector2::new(0.02, -0.05);
        let mut pos = Vector3::new(0.05, 0.01, 0.45);
        let mut vel = Vector3::new(-0.2, 0.3, 0.0);
        let (pred_pos, pred_vel) = lipm_predict(&pos, &vel, &stance, omega, 0.15);
        let dt = 1e-6;
        for _ in 0..150_000 {
            let acc = Vector3::new(
                omega * omega * (pos.x - stance.x),
                omega * omega * (pos.y - stance.y),
                0.0,
            );
            vel += acc * dt;
            pos += vel * dt;
        }
        assert!((pred_pos.xy() - pos.xy()).norm() < 1e-4);
        assert!((pred_vel.xy() - vel.xy()).norm() < 1e-4);
    }

    #[test]
    fn tvr_is_mirror_equivariant() {
        let params = TvrParams::default();
        let com = Vector3::new(0.1, 0.03, 0.45);
        let vel = Vector3::new(0.2, -0.5, 0.0);
        let right = tvr_plan(&com, &vel, Side::Right, &params);
        let mcom = Vector3::new(com.x, -com.y, com.z);
        let mvel = Vector3::new(vel.x, -vel.y, vel.z);
        let left = tvr_plan(&mcom, &mvel, Side::Left, &params);
        assert!((right.x - left.x).abs() < 1e-14);
        assert!((right.y + left.y).abs() < 1e-14);
    }

    #[test]
    fn clamp_keeps_interior_targets() {
        let region = StepRegion::default();
        let stance = Vector2::new(0.0, 0.07); // left foot
        let target = Vector2::new(0.05, -0.05);
        let out = region.clamp_step(&target, &stance, Side::Right);
        assert_eq!(out, target);
    }

    #[test]
    fn baseline_clamps_crossing_steps_extended_allows_them() {
        let region = StepRegion::default();
        let stance = Vector2::new(0.0, 0.07);
        // Crossing target: right foot aiming past the left stance foot.
        let target = Vector2::new(0.0, 0.15);
        let base = region
            .with_mode(RegionMode::BaselineRestricted)
            .clamp_step(&target, &stance, Side::Right);
        assert!((base.y - (0.07 - region.baseline_inner_gap)).abs() < 1e-12);
        let ext = region
            .with_mode(RegionMode::ProposedExtended)
            .clamp_step(&target, &stance, Side::Right);
        assert_eq!(ext, target);
    }

    #[test]
    fn clamp_is_idempotent_projection() {
        let region = StepRegion::default().with_mode(RegionMode::BaselineRestricted);
        let stance = Vector2::new(-0.02, -0.07); // right foot stance
        for (x, y) in [(0.5, 0.5), (-0.4, -0.6), (0.0, 0.0), (0.1, -0.3)] {
            let t = Vector2::new(x, y);
            let once = region.clamp_step(&t, &stance, Side::Left);
            let twice = region.clamp_step(&once, &stance, Side::Left);
            assert!((once - twice).norm() < 1e-12);
            assert!(region.contains(&once, &stance, Side::Left));
        }
    }
}
