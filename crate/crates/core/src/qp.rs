//! Small dense convex QP solver:
//!
//!   minimize   ½ xᵀP x + qᵀx
//!   subject to E x = d,  G x ≥ h
//!
//! Primal active-set method for strictly convex P, sized for the handful of
//! variables the reaction-force problems need. The caller must supply a
//! feasible starting point; both call sites construct one from the problem
//! structure, so no phase-1 is required.

use thiserror::Error;

use crate::linalg::{DMat, DVec};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub p: DMat,
    pub q: DVec,
    pub eq_mat: DMat,
    pub eq_rhs: DVec,
    pub ineq_mat: DMat,
    pub ineq_rhs: DVec,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVec,
    /// Indices of inequality rows active at the optimum.
    pub active_set: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum QpError {
    #[error("starting point violates constraints by {0:.3e}")]
    InfeasibleStart(f64),
    #[error("KKT system singular at working set {0:?}")]
    SingularKkt(Vec<usize>),
    #[error("active-set iteration limit reached ({0})")]
    IterationLimit(usize),
    #[error("problem dimensions inconsistent")]
    BadDimensions,
}

const FEAS_TOL: f64 = 1e-8;
const MULT_TOL: f64 = 1e-9;

impl QpProblem {
    pub fn num_vars(&self) -> usize {
        self.p.nrows()
    }

    pub fn objective(&self, x: &DVec) -> f64 {
        0.5 * (x.transpose() * &self.p * x)[0] + self.q.dot(x)
    }

    pub fn max_violation(&self, x: &DVec) -> f64 {
        let mut v: f64 = 0.0;
        if self.eq_mat.nrows() > 0 {
            v = v.max((&self.eq_mat * x - &self.eq_rhs).abs().max());
        }
        for i in 0..self.ineq_mat.nrows() {
            let slack = (self.ineq_mat.row(i) * x)[0] - self.ineq_rhs[i];
            v = v.max(-slack);
        }
        v
    }

    fn check(&self) -> Result<(), QpError> {
        let n = self.num_vars();
        let ok = self.p.ncols() == n
            && self.q.len() == n
            && self.eq_mat.ncols().max(n) == n
            && self.eq_mat.nrows() == self.eq_rhs.len()
            && self.ineq_mat.nrows() == self.ineq_rhs.len()
            && (self.ineq_mat.nrows() == 0 || self.ineq_mat.ncols() == n);
        if ok {
            Ok(())
        } else {
            Err(QpError::BadDimensions)
        }
    }
}

/// Solve the KKT system for the equality-constrained subproblem with rows
/// `eq ∪ working`. Returns (x, multipliers of the working inequality rows).
fn solve_kkt(prob: &QpProblem, working: &[usize]) -> Result<(DVec, DVec), QpError> {
    let n = prob.num_vars();
    let me = prob.eq_mat.nrows();
    let mw = working.len();
    let dim = n + me + mw;
    let mut kkt = DMat::zeros(dim, dim);
    let mut rhs = DVec::zeros(dim);

    kkt.view_mut((0, 0), (n, n)).copy_from(&prob.p);
    for r in 0..me {
        for c in 0..n {
            kkt[(n + r, c)] = prob.eq_mat[(r, c)];
            kkt[(c, n + r)] = prob.eq_mat[(r, c)];
        }
        rhs[n + r] = prob.eq_rhs[r];
    }
    for (k, &row) in working.iter().enumerate() {
        for c in 0..n {
            kkt[(n + me + k, c)] = prob.ineq_mat[(row, c)];
            kkt[(c, n + me + k)] = prob.ineq_mat[(row, c)];
        }
        rhs[n + me + k] = prob.ineq_rhs[row];
    }
    for c in 0..n {
        rhs[c] = -prob.q[c];
    }

    let lu = kkt.clone().full_piv_lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| QpError::SingularKkt(working.to_vec()))?;
    let residual = (&kkt * &sol - &rhs).abs().max();
    if !residual.is_finite() || residual > 1e-6 * (1.0 + rhs.abs().max()) {
        return Err(QpError::SingularKkt(working.to_vec()));
    }
    let x = DVec::from(sol.rows(0, n));
    // KKT stationarity is P x + q + Eᵀν + Gᵀλ = 0 with our sign convention
    // G x ≥ h, so active-constraint multipliers must be ≤ 0; flip so that
    // optimality reads λ ≥ 0.
    let lambda = DVec::from_fn(mw, |i, _| -sol[n + me + i]);
    Ok((x, lambda))
}

/// Primal active-set iteration from a feasible `x0`.
pub fn solve_from(prob: &QpProblem, x0: &DVec) -> Result<QpSolution, QpError> {
    prob.check()?;
    let viol = prob.max_violation(x0);
    if viol > 1e-6 {
        return Err(QpError::InfeasibleStart(viol));
    }
    let mi = prob.ineq_mat.nrows();
    let mut x = x0.clone();
    let mut working: Vec<usize> = (0..mi)
        .filter(|&i| ((prob.ineq_mat.row(i) * &x)[0] - prob.ineq_rhs[i]).abs() <= FEAS_TOL)
        .collect();
    let max_iter = 50 * (prob.num_vars() + mi + 1);

    for iter in 0..max_iter {
        let (x_star, lambda) = solve_kkt(prob, &working)?;
        let step = &x_star - &x;
        if step.abs().max() <= 1e-11 * (1.0 + x.abs().max()) {
            // Subproblem solved at x; check dual feasibility.
            if let Some((k, _)) = lambda
                .iter()
                .enumerate()
                .filter(|(_, &l)| l < -MULT_TOL)
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            {
                working.remove(k);
                continue;
            }
            return Ok(QpSolution {
                objective: prob.objective(&x),
                x,
                active_set: working,
                iterations: iter,
            });
        }
        // Longest step along `step` keeping all inactive rows feasible.
        let mut alpha = 1.0_f64;
        let mut blocking: Option<usize> = None;
        for i in 0..mi {
            if working.contains(&i) {
                continue;
            }
            let g_step = (prob.ineq_mat.row(i) * &step)[0];
            if g_step < -1e-12 {
                let slack = (prob.ineq_mat.row(i) * &x)[0] - prob.ineq_rhs[i];
                let a = (slack / -g_step).max(0.0);
                if a < alpha {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        x += step * alpha;
        if let Some(b) = blocking {
            if alpha < 1.0 {
                working.push(b);
                working.sort_unstable();
            }
        }
    }
    Err(QpError::IterationLimit(max_iter))
}
