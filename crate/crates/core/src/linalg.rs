//! Small dense linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

pub type DMat = DMatrix<f64>;
pub type DVec = DVector<f64>;

/// Relative singular-value cutoff used by every pseudo-inverse in the crate.
pub const PINV_REL_TOL: f64 = 1e-8;

/// Skew-symmetric cross-product matrix, `skew(a) * b == a × b`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// `rel_tol * σ_max` are treated as zero.
pub fn pinv(m: &DMat, rel_tol: f64) -> DMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMat::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let cut = rel_tol * s_max;
    let u = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let mut s_inv = DMat::zeros(vt.nrows(), u.ncols());
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > cut && *s > 0.0 {
            s_inv[(i, i)] = 1.0 / s;
        }
    }
    vt.transpose() * s_inv * u.transpose()
}

/// Pseudo-inverse of a symmetric PSD matrix via eigendecomposition.
/// Eigenvalues below `rel_tol * λ_max` are dropped.
pub fn pinv_psd(m: &DMat, rel_tol: f64) -> DMat {
    debug_assert_eq!(m.nrows(), m.ncols());
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = m.clone().symmetric_eigen();
    let l_max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cut = rel_tol * l_max;
    let mut inv = DMat::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let l = eig.eigenvalues[i];
        if l > cut && l > 0.0 {
            let v = eig.eigenvectors.column(i);
            inv += DMat::from(&v * v.transpose()) / l;
        }
    }
    inv
}

/// Symmetric square root of a PSD matrix (negative eigenvalues clamped to 0).
pub fn sqrt_psd(m: &DMat) -> DMat {
    let eig = m.clone().symmetric_eigen();
    let mut out = DMat::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let l = eig.eigenvalues[i].max(0.0);
        let v = eig.eigenvectors.column(i);
        out += DMat::from(&v * v.transpose()) * l.sqrt();
    }
    out
}

/// Force exact symmetry: (M + Mᵀ)/2.
pub fn symmetrize(m: &DMat) -> DMat {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMat) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_recovers_inverse_for_square_full_rank() {
        let m = DMat::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let p = pinv(&m, PINV_REL_TOL);
        let id = &m * &p;
        assert!((id - DMat::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn pinv_psd_annihilates_null_space() {
        let m = DMat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = pinv_psd(&m, PINV_REL_TOL);
        assert!((p[(0, 0)] - 0.5).abs() < 1e-12);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn skew_matches_cross_product() {
        let a = Vector3::new(1.0, -2.0, 0.5);
        let b = Vector3::new(0.3, 0.7, -1.1);
        assert!((skew(&a) * b - a.cross(&b)).norm() < 1e-15);
    }
}
