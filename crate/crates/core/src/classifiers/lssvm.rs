//! Least-squares SVM classifier.
//!
//! Training solves
//!
//! ```text
//! [ 0   yᵀ      ] [b]   [0]
//! [ y   Ω + I/γ ] [α] = [1]      Ω_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! via two Cholesky solves against `H = Ω + I/γ`: with `η = H⁻¹y` and
//! `ν = H⁻¹1`, `b = yᵀν / yᵀη` and `α = ν − bη`.

use nalgebra::{DMatrix, DVector};

use crate::linalg::solve_spd;

#[derive(Debug, Clone, PartialEq)]
pub struct LssvmSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// `‖A z − rhs‖ / ‖rhs‖` on the full bordered system.
    pub relative_residual: f64,
    /// Diagonal jitter that was needed for the factorization.
    pub jitter: f64,
}

pub fn solve_lssvm(gram: &DMatrix<f64>, y: &[f64], gamma_reg: f64) -> LssvmSolution {
    let n = y.len();
    let mut h = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * gram[(i, j)]);
    for i in 0..n {
        h[(i, i)] += 1.0 / gamma_reg;
    }
    let yv = DVector::from_column_slice(y);
    let ones = DVector::from_element(n, 1.0);
    let mut jitter = 0.0;
    let (eta, nu) = loop {
        let mut hj = h.clone();
        for i in 0..n {
            hj[(i, i)] += jitter;
        }
        if let (Some(eta), Some(nu)) = (solve_spd(&hj, &yv), solve_spd(&hj, &ones)) {
            break (eta, nu);
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
    };
    let denom = yv.dot(&eta);
    let bias = if denom.abs() > 0.0 { yv.dot(&nu) / denom } else { 0.0 };
    let alpha = &nu - &eta * bias;

    // residual of the original (unjittered) system
    let top = yv.dot(&alpha);
    let rest = &h * &alpha + &yv * bias - &ones;
    let residual = (top * top + rest.norm_squared()).sqrt();
    LssvmSolution {
        alpha: alpha.iter().copied().collect(),
        bias,
        relative_residual: residual / (n as f64).sqrt().max(1.0),
        jitter,
    }
}

/// Kernel-expansion coefficients `αᵢ yᵢ` for every training row.
pub(crate) fn expansion(y: &[f64], sol: &LssvmSolution) -> Vec<f64> {
    sol.alpha.iter().zip(y).map(|(a, y)| a * y).collect()
}
