//! Artificial-potential-field baseline: position-only repulsion with an
//! identity metric, used as the comparison back-end for the collision RMP.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::model::WitnessPair;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApfParams {
    /// Repulsion gain, m/s².
    pub k_p: f64,
    /// Repulsion length scale, m.
    pub l_p: f64,
}

impl Default for ApfParams {
    fn default() -> Self {
        ApfParams { k_p: 12.0, l_p: 0.01 }
    }
}

/// Repulsive acceleration K_p·exp(−x/l_p) pushing capsule a away from
/// capsule b, independent of the approach velocity.
pub fn apf_baseline_accel(witness: &WitnessPair, params: &ApfParams) -> Vector3<f64> {
    -witness.direction * params.k_p * (-witness.distance / params.l_p).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DMat;

    fn witness_at(distance: f64, rate: f64) -> WitnessPair {
        WitnessPair {
            point_a: Vector3::zeros(),
            point_b: Vector3::new(0.0, distance, 0.0),
            distance,
            direction: Vector3::y(),
            jacobian_rel: DMat::zeros(1, 12),
            rate,
            jdot_qdot: 0.0,
        }
    }

    #[test]
    fn decays_with_distance() {
        let p = ApfParams::default();
        let far = apf_baseline_accel(&witness_at(1.0, 0.0), &p);
        assert!(far.norm() < 1e-10);
    }

    #[test]
    fn contact_gives_full_gain_along_normal() {
        let p = ApfParams::default();
        let a = apf_baseline_accel(&witness_at(0.0, 0.0), &p);
        assert!((a - Vector3::new(0.0, -p.k_p, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn no_velocity_dependence_unlike_collision_rmp() {
        let p = ApfParams::default();
        let approaching = apf_baseline_accel(&witness_at(0.02, -0.5), &p);
        let retreating = apf_baseline_accel(&witness_at(0.02, 0.5), &p);
        assert_eq!(approaching, retreating);

        let rmp_params = crate::rmp::CollisionRmpParams::default();
        let rmp_in = crate::rmp::collision_rmp(0.02, -0.5, &rmp_params);
        let rmp_out = crate::rmp::collision_rmp(0.02, 0.5, &rmp_params);
        assert!(rmp_in.accel[0] != rmp_out.accel[0]);
        assert!(rmp_in.metric[(0, 0)] > rmp_out.metric[(0, 0)]);
    }
}
