//! Unconstrained optimizers used by the neural-network trainers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{lstsq, solve_spd};

/// Consecutive rejected steps after which LM gives up.
pub const MAX_REJECTIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Stop once an accepted step lowers the objective by less than this.
    pub f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-6,
            f_tol: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// BFGS with an inverse-Hessian approximation and Armijo backtracking.
///
/// `fg` returns the objective and its gradient. The approximation is reset
/// to the identity whenever the curvature condition fails.
pub fn bfgs<F>(mut fg: F, x0: DVector<f64>, opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = fg(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = g.norm() < opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            h.fill_with_identity();
            d = -g.clone();
            slope = -g.norm_squared();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &d * t;
            let (fnew, gnew) = fg(&xn);
            if fnew.is_finite() && fnew <= f + 1e-4 * t * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            break;
        };
        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hyᵀ + hy sᵀ) + (rho² yHy + rho) s sᵀ
            h -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
        } else {
            h.fill_with_identity();
        }
        let drop = f - fnew;
        x = xn;
        f = fnew;
        g = gnew;
        if g.norm() < opts.grad_tol || drop < opts.f_tol {
            converged = true;
        }
    }
    BfgsResult {
        grad_norm: g.norm(),
        x,
        f,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    pub lambda0: f64,
    /// Stop once an accepted step lowers the loss by less than this.
    pub tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            lambda0: 1e-3,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub x: DVector<f64>,
    /// `½‖r‖²` at `x`.
    pub loss: f64,
    pub iterations: usize,
    /// Loss after every accepted step, starting with the initial loss.
    pub accepted_losses: Vec<f64>,
    pub converged: bool,
    /// Hit [`MAX_REJECTIONS`] consecutive rejections.
    pub aborted: bool,
}

fn half_sq(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Levenberg-Marquardt on a residual vector.
///
/// `rj` returns residuals and their Jacobian. λ is divided by 10 on an
/// accepted step and multiplied by 10 on a rejected one. A step is accepted
/// only if it does not increase the loss.
pub fn levenberg_marquardt<F>(mut rj: F, x0: DVector<f64>, opts: &LmOptions) -> LmResult
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut x = x0;
    let (mut r, mut j) = rj(&x);
    let mut loss = half_sq(&r);
    let mut lambda = opts.lambda0;
    let mut accepted_losses = vec![loss];
    let mut rejections = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut aborted = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let step = lm_step(&j, &r, lambda);
        let xn = &x + &step;
        let (rn, jn) = rj(&xn);
        let ln = half_sq(&rn);
        if ln.is_finite() && ln <= loss {
            let drop = loss - ln;
            x = xn;
            r = rn;
            j = jn;
            loss = ln;
            accepted_losses.push(loss);
            lambda = (lambda / 10.0).max(1e-15);
            rejections = 0;
            if drop < opts.tol || (j.transpose() * &r).amax() < 1e-12 {
                converged = true;
                break;
            }
        } else {
            lambda = (lambda * 10.0).min(1e15);
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                aborted = true;
                break;
            }
        }
    }
    LmResult {
        x,
        loss,
        iterations,
        accepted_losses,
        converged,
        aborted,
    }
}

/// Solves `(JᵀJ + λI) δ = -Jᵀr`, through the `n × n` dual form when
/// parameters outnumber residuals.
fn lm_step(j: &DMatrix<f64>, r: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let (n, p) = j.shape();
    if p <= n {
        let mut a = j.tr_mul(j);
        for i in 0..p {
            a[(i, i)] += lambda;
        }
        let g = -j.tr_mul(r);
        solve_spd(&a, &g).unwrap_or_else(|| lstsq(&a, &g).0)
    } else {
        let mut a = j * j.transpose();
        for i in 0..n {
            a[(i, i)] += lambda;
        }
        let u = solve_spd(&a, r).unwrap_or_else(|| lstsq(&a, r).0);
        -j.tr_mul(&u)
    }
}
