//! Dynamically consistent null-space task prioritization: the recursion that
//! turns a stack of task accelerations into a configuration-space command and
//! the projector into the remaining null space.

use crate::linalg::{pinv_psd, symmetrize, DMat, DVec, PINV_REL_TOL};

/// J̄ = A⁻¹ Jᵀ Λ with Λ = (J A⁻¹ Jᵀ)†, the kinetic-energy-norm generalized
/// inverse.
pub fn dyn_pinv(j: &DMat, a: &DMat) -> DMat {
    let a_inv = a
        .clone()
        .cholesky()
        .expect("mass matrix must be SPD")
        .inverse();
    dyn_pinv_with_inv(j, &a_inv)
}

/// Same as [`dyn_pinv`] with the mass-matrix inverse precomputed.
pub fn dyn_pinv_with_inv(j: &DMat, a_inv: &DMat) -> DMat {
    let lambda = operational_inertia(j, a_inv);
    a_inv * j.transpose() * lambda
}

/// Operational-space inertia Λ = (J A⁻¹ Jᵀ)†, pseudo-inverted through an
/// eigendecomposition with relative cutoff 1e-8·λ_max.
pub fn operational_inertia(j: &DMat, a_inv: &DMat) -> DMat {
    let gram = symmetrize(&(j * a_inv * j.transpose()));
    pinv_psd(&gram, PINV_REL_TOL)
}

/// One priority level: task Jacobian, velocity-product bias, and commanded
/// task acceleration.
#[derive(Debug, Clone)]
pub struct TaskLevel {
    pub name: String,
    pub jacobian: DMat,
    pub jdot_qd: DVec,
    pub xdd_cmd: DVec,
}

/// Contact constraint occupying priority level zero.
#[derive(Debug, Clone)]
pub struct ContactConstraint {
    pub jacobian: DMat,
    pub jdot_qd: DVec,
}

/// Ordered task stack with the contact at the top.
#[derive(Debug, Clone, Default)]
pub struct PriorityStack {
    pub contact: Option<ContactConstraint>,
    pub tasks: Vec<TaskLevel>,
}

/// Per-level diagnostics of the projection recursion.
#[derive(Debug, Clone)]
pub struct LevelReport {
    pub name: String,
    /// ‖J q̈ + J̇q̇ − ẍ_cmd‖∞ after this level's update.
    pub residual: f64,
    /// Rank of the projected Jacobian; below the row count the task is only
    /// partially realized.
    pub rank: usize,
    pub rows: usize,
}

/// Output of the prioritized recursion.
#[derive(Debug, Clone)]
pub struct ProjectedStack {
    /// q̈_k — acceleration command realizing the stack.
    pub qdd_cmd: DVec,
    /// N_k — accumulated null-space projector.
    pub n_k: DMat,
    /// N₀ and q̈₀ of the contact level.
    pub n_0: DMat,
    pub qdd_0: DVec,
    pub levels: Vec<LevelReport>,
}

fn rank_of(j: &DMat) -> usize {
    if j.nrows() == 0 {
        return 0;
    }
    let svd = j.clone().svd(false, false);
    let smax = svd.singular_values.max();
    svd.singular_values
        .iter()
        .filter(|&&s| s > PINV_REL_TOL * smax && s > 0.0)
        .count()
}

/// Contact level: q̈₀ = J̄_c(−J̇_c q̇) and N₀ = I − J̄_c J_c. An empty contact
/// set yields q̈₀ = 0, N₀ = I.
pub fn contact_accel(contact: Option<&ContactConstraint>, a_inv: &DMat, nv: usize) -> (DVec, DMat) {
    match contact {
        None => (DVec::zeros(nv), DMat::identity(nv, nv)),
        Some(c) => {
            let jbar = dyn_pinv_with_inv(&c.jacobian, a_inv);
            let qdd0 = &jbar * (-&c.jdot_qd);
            let n0 = DMat::identity(nv, nv) - jbar * &c.jacobian;
            (qdd0, n0)
        }
    }
}

/// Run the full recursion:
/// q̈ᵢ = q̈ᵢ₋₁ + J̄_{i|pre}(ẍᵢ − J̇ᵢq̇ − Jᵢ q̈ᵢ₋₁), N_i = N_{i-1}(I − J̄_{i|pre} J_{i|pre}).
pub fn project_tasks(stack: &PriorityStack, a: &DMat) -> ProjectedStack {
    let nv = a.nrows();
    let a_inv = a
        .clone()
        .cholesky()
        .expect("mass matrix must be SPD")
        .inverse();

    let (qdd_0, n_0) = contact_accel(stack.contact.as_ref(), &a_inv, nv);
    let mut qdd = qdd_0.clone();
    let mut n_k = n_0.clone();
    let mut levels = Vec::with_capacity(stack.tasks.len());

    for task in &stack.tasks {
        let j_pre = &task.jacobian * &n_k;
        let jbar = dyn_pinv_with_inv(&j_pre, &a_inv);
        let err = &task.xdd_cmd - &task.jdot_qd - &task.jacobian * &qdd;
        qdd += &jbar * err;
        n_k = &n_k * (DMat::identity(nv, nv) - &jbar * &j_pre);

        let residual = (&task.jacobian * &qdd + &task.jdot_qd - &task.xdd_cmd)
            .abs()
            .max();
        levels.push(LevelReport {
            name: task.name.clone(),
            residual,
            rank: rank_of(&j_pre),
            rows: j_pre.nrows(),
        });
    }

    ProjectedStack {
        qdd_cmd: qdd,
        n_k,
        n_0,
        qdd_0,
        levels,
    }
}
