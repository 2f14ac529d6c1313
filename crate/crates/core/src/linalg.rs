//! Dense least-squares helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SigError};

/// Outcome of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    /// Euclidean norm of A x − b.
    pub residual_norm: f64,
    /// Effective rank after singular-value truncation (0 when the ridge
    /// path was taken and no truncation applies).
    pub rank: usize,
    /// Whether any singular values were truncated.
    pub truncated: bool,
}

/// Minimum-norm least squares via SVD with relative singular-value cutoff
/// rcond = max(nrows, ncols) · machine epsilon, mirroring the behaviour of
/// standard lstsq routines on rank-deficient systems.
pub fn svd_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LstsqSolution> {
    if a.nrows() != b.len() {
        return Err(SigError::invalid(format!(
            "lstsq shape mismatch: {}x{} matrix vs rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let svd = nalgebra::linalg::SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| SigError::numeric("SVD failed to converge"))?;
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if !smax.is_finite() {
        return Err(SigError::numeric("non-finite singular values"));
    }
    if smax == 0.0 {
        return Err(SigError::Conditioning(
            "system matrix is numerically zero".into(),
        ));
    }
    let cutoff = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let k = svd.singular_values.len();
    let mut rank = 0usize;
    let mut y = DVector::zeros(k);
    let utb = u.transpose() * b;
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cutoff {
            y[i] = utb[i] / s;
            rank += 1;
        }
    }
    let x = vt.transpose() * y;
    let residual_norm = (a * &x - b).norm();
    Ok(LstsqSolution {
        x,
        residual_norm,
        rank,
        truncated: rank < k,
    })
}

/// Ridge-regularized least squares min ‖Ax−b‖² + λ‖x‖² via QR on the
/// augmented system.
pub fn ridge_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Result<LstsqSolution> {
    assert!(lambda > 0.0);
    let (m, n) = (a.nrows(), a.ncols());
    let mut aug = DMatrix::zeros(m + n, n);
    aug.view_mut((0, 0), (m, n)).copy_from(a);
    let sq = lambda.sqrt();
    for i in 0..n {
        aug[(m + i, i)] = sq;
    }
    let mut rhs = DVector::zeros(m + n);
    rhs.rows_mut(0, m).copy_from(b);
    let qr = aug.qr();
    let x = qr
        .solve(&rhs)
        .ok_or_else(|| SigError::Conditioning("ridge QR solve failed".into()))?;
    let residual_norm = (a * &x - b).norm();
    Ok(LstsqSolution {
        x,
        residual_norm,
        rank: n,
        truncated: false,
    })
}

/// Reciprocal condition estimate from the SVD extremes (used to decide
/// between the direct and the orthogonal-factorization solve paths).
pub fn condition_number(a: &DMatrix<f64>) -> Option<f64> {
    let svd = nalgebra::linalg::SVD::try_new(a.clone(), false, false, f64::EPSILON, 0)?;
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        return Some(f64::INFINITY);
    }
    Some(smax / smin)
}

/// Small dense LU solve for Newton steps; errors on singular blocks.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| SigError::numeric("singular Jacobian block"))
}
