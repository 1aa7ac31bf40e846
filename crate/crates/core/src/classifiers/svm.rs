//! Soft-margin SVM trained by sequential minimal optimization.
//!
//! Working pairs are chosen with the second-order rule of Fan, Chen and Lin
//! (the LIBSVM default). Training stops once the maximal KKT violation
//! `m(α) − M(α)` falls below the tolerance.

use nalgebra::{DMatrix, DVector};

use super::kernel::KernelSpec;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    /// Dual variables, one per training row.
    pub alpha: Vec<f64>,
    /// Decision bias: `f(x) = Σ αᵢ yᵢ K(xᵢ, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `Σ α − ½ αᵀ Q α` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective(gram: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Solves the C-SVM dual for labels `y ∈ {−1, +1}`.
pub fn smo(gram: &DMatrix<f64>, y: &[f64], c: f64, tol: f64, max_iter: usize) -> SmoSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * gram[(i, j)];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        // j: second-order choice in I_low
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !low {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = gram[(i, i)] + gram[(t, t)] - 2.0 * gram[(i, t)];
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < tol {
            converged = true;
            break;
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for (k, g) in grad.iter_mut().enumerate() {
            *g += q(i, k) * di + q(j, k) * dj;
        }
    }

    SmoSolution {
        bias: -rho(&alpha, &grad, y, c),
        alpha,
        iterations,
        converged,
    }
}

fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for i in 0..alpha.len() {
        let yg = y[i] * grad[i];
        if alpha[i] >= c {
            if y[i] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[i] <= 0.0 {
            if y[i] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    }
}

/// Support rows and coefficients `αᵢ yᵢ` of a kernel expansion.
pub(crate) fn support_expansion(x: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let keep: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > 0.0).collect();
    let coef = keep.iter().map(|&i| alpha[i] * y[i]).collect();
    (x.select_rows(&keep), coef)
}

/// `Σ coef_k K(sv_k, x) + bias` for every row of `x`.
pub(crate) fn kernel_decision(
    kernel: &KernelSpec,
    support: &DMatrix<f64>,
    coef: &[f64],
    bias: f64,
    x: &DMatrix<f64>,
) -> Vec<f64> {
    if support.nrows() == 0 {
        return vec![bias; x.nrows()];
    }
    let k = kernel.cross(x, support);
    let c = DVector::from_column_slice(coef);
    (k * c).iter().map(|v| v + bias).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_give_the_bisector() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 2.0]);
        let y = [-1.0, 1.0];
        let k = KernelSpec::linear();
        let sol = smo(&k.gram(&x), &y, 1.0, 1e-3, 1000);
        assert!(sol.converged);
        let (sv, coef) = support_expansion(&x, &y, &sol.alpha);
        let probe = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 2.0, 2.0, 1.0, 1.0]);
        let f = kernel_decision(&k, &sv, &coef, sol.bias, &probe);
        assert!(f[0] < 0.0 && f[1] > 0.0);
        assert!(f[2].abs() < 1e-9);
    }

    #[test]
    fn dual_objective_beats_zero() {
        let x = DMatrix::from_row_slice(6, 1, &[0.0, 1.0, 2.0, 1.5, 3.0, 4.0]);
        let y = [-1.0, -1.0, -1.0, 1.0, 1.0, 1.0];
        let g = KernelSpec::rbf(0.5).gram(&x);
        let sol = smo(&g, &y, 1.0, 1e-3, 1000);
        assert!(dual_objective(&g, &y, &sol.alpha) >= 0.0);
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-10);
        assert!(sol.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
    }
}
