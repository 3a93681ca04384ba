//! Fusing the configuration-space RMP with the prioritized command: the
//! modified pullback and the final acceleration command.

use crate::linalg::{pinv_psd, symmetrize, DMat, DVec, PINV_REL_TOL};
use crate::rmp::NaturalRmp;

/// Project the root RMP into the null space of the first k priority levels:
/// M_rmp = N_kᵀ M N_k, f_rmp = N_kᵀ (f − M q̈_k).
pub fn modified_pullback(root: &NaturalRmp, n_k: &DMat, qdd_k: &DVec) -> NaturalRmp {
    NaturalRmp {
        metric: symmetrize(&(n_k.transpose() * &root.metric * n_k)),
        force: n_k.transpose() * (&root.force - &root.metric * qdd_k),
    }
}

/// q̈ = q̈_k + N_k M_rmp† f_rmp.
pub fn final_accel(qdd_k: &DVec, n_k: &DMat, projected: &NaturalRmp) -> DVec {
    qdd_k + n_k * (pinv_psd(&projected.metric, PINV_REL_TOL) * &projected.force)
}
