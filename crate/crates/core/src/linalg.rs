//! Small dense linear-algebra helpers shared by the fitting code.

use nalgebra::{DMatrix, DVector};

/// Solves `a x = b` for symmetric positive definite `a`.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b))
}

/// Relative singular-value cutoff used by [`lstsq`].
const PINV_RCOND: f64 = 1e-12;

/// Minimum-norm least-squares solution of `a x ≈ b` via the SVD.
///
/// The flag is `true` when `a` is rank deficient at the cutoff, i.e. the
/// normal equations are singular and the pseudo-inverse was needed.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return (DVector::zeros(cols), cols > 0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = PINV_RCOND * smax.max(f64::MIN_POSITIVE) * rows.max(cols) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd
        .solve(b, eps)
        .unwrap_or_else(|_| DVector::zeros(cols));
    (x, rank < cols)
}

/// Design matrix with a leading column of ones.
pub(crate) fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_exact_system() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, singular) = lstsq(&a, &b);
        assert!(!singular);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_rank_deficient_is_min_norm() {
        // duplicated column: min-norm solution splits the weight evenly
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let b = DVector::from_vec(vec![2.0, 4.0]);
        let (x, singular) = lstsq(&a, &b);
        assert!(singular);
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }
}
